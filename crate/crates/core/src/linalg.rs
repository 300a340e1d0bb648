//! Sparse symmetric storage, preconditioned conjugate gradients and a banded
//! Cholesky factorization. Internal machinery behind the elliptic solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

/// Row-by-row builder; within a row the columns are pushed in ascending order.
pub(crate) struct CsrBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self { n, row_ptr, col: Vec::new(), val: Vec::new() }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        debug_assert!(col < self.n);
        // columns must arrive in ascending order within the current row
        debug_assert!(
            self.col.len() == *self.row_ptr.last().unwrap() || *self.col.last().unwrap() < col
        );
        self.col.push(col);
        self.val.push(val);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.col.len());
    }

    pub fn build(self) -> Csr {
        debug_assert_eq!(self.row_ptr.len(), self.n + 1);
        Csr { n: self.n, row_ptr: self.row_ptr, col: self.col, val: self.val }
    }
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] == r {
                    d[r] = self.val[k];
                }
            }
        }
        d
    }

    /// Largest entry of `|A - A^T|`; zero for a structurally symmetric matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col[k];
                let mut mirrored = 0.0;
                for kk in self.row_ptr[c]..self.row_ptr[c + 1] {
                    if self.col[kk] == r {
                        mirrored = self.val[kk];
                    }
                }
                worst = worst.max(libm::fabs(self.val[k] - mirrored));
            }
        }
        worst
    }

    /// Half bandwidth `max |row - col|`.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                bw = bw.max(r.abs_diff(self.col[k]));
            }
        }
        bw
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn remove_mean(v: &mut [f64]) {
    let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Jacobi-preconditioned conjugate gradients for an SPD system.
///
/// With `deflate_mean` the solve is restricted to the mean-zero complement of
/// the constant nullspace (pure-Neumann operators); the right-hand side is
/// projected onto the range first.
pub(crate) fn pcg(
    a: &Csr,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
    deflate_mean: bool,
) -> Result<Vec<f64>> {
    let n = a.n;
    let mut rhs = b.to_vec();
    if deflate_mean {
        remove_mean(&mut rhs);
    }
    let b_norm = norm2(&rhs);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> =
        diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, mi)| ri * mi).collect();
    if deflate_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let tol = rel_tol * b_norm;

    for _ in 0..max_iters {
        if norm2(&r) <= tol {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverDidNotConverge { iters: 0, residual: norm2(&r) });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if deflate_mean {
            remove_mean(&mut r);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        if deflate_mean {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if norm2(&r) <= tol {
        Ok(x)
    } else {
        Err(Error::SolverDidNotConverge { iters: max_iters, residual: norm2(&r) / b_norm })
    }
}

/// Lower-banded Cholesky factorization of an SPD matrix.
///
/// Storage is row-major with `bw + 1` slots per row; slot `bw` is the
/// diagonal and slot `bw - d` holds the entry `d` columns left of it.
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let stride = bw + 1;
        let mut l = vec![0.0; n * stride];
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col[k];
                if c <= r {
                    l[r * stride + (bw - (r - c))] = a.val[k];
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[i * stride + (bw - (i - j))];
                let kmin = lo.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= l[i * stride + (bw - (i - k))] * l[j * stride + (bw - (j - k))];
                }
                if j < i {
                    l[i * stride + (bw - (i - j))] = s / l[j * stride + bw];
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::FactorizationFailed { row: i });
                    }
                    l[i * stride + bw] = libm::sqrt(s);
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let stride = self.bw + 1;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * stride + (self.bw - (i - k))] * x[k];
            }
            x[i] = s / self.l[i * stride + self.bw];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.l[k * stride + (self.bw - (k - i))] * x[k];
            }
            x[i] = s / self.l[i * stride + self.bw];
        }
        x
    }
}
