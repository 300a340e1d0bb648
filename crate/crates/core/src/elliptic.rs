//! Variable-coefficient Poisson solvers on the uniform grid.
//!
//! Divergence-form operators are discretized in flux form with harmonic-mean
//! face coefficients, which keeps the assembled matrices symmetric and copes
//! with the discontinuous coefficients produced by the level-set projector.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid2D, ScalarField};
use crate::linalg::{pcg, BandedCholesky, Csr, CsrBuilder};

/// Linear solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
    /// Banded Cholesky factorization; exact up to rounding, meant for
    /// small and medium grids.
    Direct,
}

/// Tolerances for the linear solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub method: SolveMethod,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { method: SolveMethod::ConjugateGradient, rel_tol: 1e-10, max_iters: 20_000 }
    }
}

impl SolverSettings {
    pub fn direct() -> Self {
        Self { method: SolveMethod::Direct, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter("solver rel_tol must be in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("solver max_iters must be positive"));
        }
        Ok(())
    }
}

/// Boundary condition kind of an assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

fn check_coefficient(coeff: &ScalarField) -> Result<()> {
    let min = coeff.min_value();
    if !(min > 0.0) {
        return Err(Error::NonPositiveCoefficient { min });
    }
    Ok(())
}

/// An assembled elliptic operator `-div(coeff grad .)` ready for repeated
/// solves. Dirichlet systems act on interior nodes; Neumann systems on all
/// nodes in finite-volume (volume-scaled) form.
pub struct EllipticSystem {
    grid: Grid2D,
    coeff: ScalarField,
    bc: BcKind,
    settings: SolverSettings,
    matrix: Csr,
    factor: Option<BandedCholesky>,
    // (interior row, boundary ring index, coupling) for the Dirichlet RHS
    couplings: Vec<(usize, usize, f64)>,
}

impl EllipticSystem {
    /// Assemble the interior Dirichlet system for `-div(coeff grad w) = rhs`.
    pub fn dirichlet(coeff: ScalarField, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        check_coefficient(&coeff)?;
        let grid = coeff.grid();
        let (matrix, couplings) = assemble_dirichlet(&grid, &coeff);
        let factor = match settings.method {
            SolveMethod::Direct => Some(BandedCholesky::factor(&matrix)?),
            SolveMethod::ConjugateGradient => None,
        };
        Ok(Self { grid, coeff, bc: BcKind::Dirichlet, settings, matrix, factor, couplings })
    }

    /// Assemble the singular pure-Neumann system for `-div(coeff grad v)`.
    pub fn neumann(coeff: ScalarField, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        check_coefficient(&coeff)?;
        let grid = coeff.grid();
        let matrix = assemble_neumann(&grid, &coeff);
        // the pure-Neumann operator is singular; solves go through deflated CG
        Ok(Self {
            grid,
            coeff,
            bc: BcKind::Neumann,
            settings,
            matrix,
            factor: None,
            couplings: Vec::new(),
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn coefficient(&self) -> &ScalarField {
        &self.coeff
    }

    pub fn bc_kind(&self) -> BcKind {
        self.bc
    }

    /// Largest entry of `|A - A^T|` of the assembled matrix.
    pub fn max_asymmetry(&self) -> f64 {
        self.matrix.max_asymmetry()
    }

    pub(crate) fn n_interior(&self) -> usize {
        (self.grid.nx() - 2) * (self.grid.ny() - 2)
    }

    pub(crate) fn interior_index(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.grid.nx() - 2) + (i - 1)
    }

    /// Solve the raw interior system `A x = b`; `b` is indexed like the
    /// interior nodes. Dirichlet systems only.
    pub(crate) fn solve_interior(&self, b: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(self.bc, BcKind::Dirichlet);
        match &self.factor {
            Some(f) => Ok(f.solve(b)),
            None => pcg(&self.matrix, b, self.settings.rel_tol, self.settings.max_iters, false),
        }
    }

    /// Solve `-div(coeff grad w) = rhs` in the interior with `w = g` on the
    /// boundary.
    pub fn solve_with(&self, rhs: &ScalarField, g: &BoundaryTrace) -> Result<ScalarField> {
        debug_assert_eq!(self.bc, BcKind::Dirichlet);
        if rhs.grid() != self.grid || g.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut b = vec![0.0; self.n_interior()];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                b[self.interior_index(i, j)] = rhs.get(i, j);
            }
        }
        for &(row, ring, t) in &self.couplings {
            b[row] += t * g.values()[ring];
        }
        let x = self.solve_interior(&b)?;
        let mut w = ScalarField::zeros(self.grid);
        w.apply_boundary(g)?;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                w.set(i, j, x[self.interior_index(i, j)]);
            }
        }
        if !w.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        Ok(w)
    }

    /// Solve the pure-Neumann problem `div(coeff grad v) = 0` with conormal
    /// flux data `coeff dv/dnu = flux`. The flux is first projected onto the
    /// compatible (zero arc-length mean) subspace and the solution is
    /// normalized to zero area mean.
    pub fn solve_flux(&self, flux: &BoundaryTrace) -> Result<ScalarField> {
        debug_assert_eq!(self.bc, BcKind::Neumann);
        if flux.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mean = flux.mean();
        let mut b = vec![0.0; self.grid.n_nodes()];
        for (k, (i, j)) in self.grid.boundary_nodes().enumerate() {
            b[self.grid.idx(i, j)] = self.grid.ds_weight(i, j) * (flux.values()[k] - mean);
        }
        self.solve_neumann_rhs(b)
    }

    /// Solve `-div(coeff grad v) = source - mean(source)` with homogeneous
    /// Neumann boundary, zero-mean normalized. The incompatible mean
    /// component of the source is removed first.
    pub fn solve_source(&self, source: &ScalarField) -> Result<ScalarField> {
        debug_assert_eq!(self.bc, BcKind::Neumann);
        if source.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mean = source.mean();
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut b = vec![0.0; self.grid.n_nodes()];
        for j in 0..ny {
            for i in 0..nx {
                b[self.grid.idx(i, j)] = self.grid.area_weight(i, j) * (source.get(i, j) - mean);
            }
        }
        self.solve_neumann_rhs(b)
    }

    fn solve_neumann_rhs(&self, b: Vec<f64>) -> Result<ScalarField> {
        let x = match self.settings.method {
            SolveMethod::ConjugateGradient => {
                pcg(&self.matrix, &b, self.settings.rel_tol, self.settings.max_iters, true)?
            }
            // pin node 0 to lift the constant nullspace, then re-center
            SolveMethod::Direct => {
                let n = self.matrix.n;
                let mut builder = CsrBuilder::new(n - 1);
                for r in 1..n {
                    for k in self.matrix.row_ptr[r]..self.matrix.row_ptr[r + 1] {
                        let c = self.matrix.col[k];
                        if c >= 1 {
                            builder.push(c - 1, self.matrix.val[k]);
                        }
                    }
                    builder.finish_row();
                }
                let reduced = builder.build();
                let mut rhs = b.clone();
                let mean: f64 = rhs.iter().sum::<f64>() / n as f64;
                for v in rhs.iter_mut() {
                    *v -= mean;
                }
                let mut x = vec![0.0];
                x.extend(BandedCholesky::factor(&reduced)?.solve(&rhs[1..]));
                x
            }
        };
        let mut v = ScalarField::from_values(self.grid, x)?;
        let mean = v.mean();
        for val in v.values_mut() {
            *val -= mean;
        }
        Ok(v)
    }
}

/// One-shot Dirichlet solve of `-div(coeff grad w) = rhs`, `w = g` on the
/// boundary.
pub fn solve_dirichlet(
    coeff: &ScalarField,
    rhs: &ScalarField,
    g: &BoundaryTrace,
    settings: SolverSettings,
) -> Result<ScalarField> {
    EllipticSystem::dirichlet(coeff.clone(), settings)?.solve_with(rhs, g)
}

/// One-shot pure-Neumann solve of `div(coeff grad v) = 0`,
/// `coeff dv/dnu = flux`, zero-mean normalized.
pub fn solve_neumann(
    coeff: &ScalarField,
    flux: &BoundaryTrace,
    settings: SolverSettings,
) -> Result<ScalarField> {
    EllipticSystem::neumann(coeff.clone(), settings)?.solve_flux(flux)
}

/// Discrete harmonic extension of boundary data.
pub fn solve_laplace_dirichlet(
    bdata: &BoundaryTrace,
    settings: SolverSettings,
) -> Result<ScalarField> {
    let grid = bdata.grid();
    let one = ScalarField::constant(grid, 1.0);
    let zero = ScalarField::zeros(grid);
    solve_dirichlet(&one, &zero, bdata, settings)
}

/// Solve the screened Neumann problem `(I - Lap) x = rhs` with the
/// ghost-reflection Laplacian; symmetric positive definite, not singular.
pub fn solve_screened_neumann(rhs: &ScalarField, settings: SolverSettings) -> Result<ScalarField> {
    settings.validate()?;
    let grid = rhs.grid();
    let one = ScalarField::constant(grid, 1.0);
    let mut matrix = assemble_neumann(&grid, &one);
    // add the volume-scaled identity
    let mut diag_add = vec![0.0; grid.n_nodes()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            diag_add[grid.idx(i, j)] = grid.area_weight(i, j);
        }
    }
    for r in 0..matrix.n {
        for k in matrix.row_ptr[r]..matrix.row_ptr[r + 1] {
            if matrix.col[k] == r {
                matrix.val[k] += diag_add[r];
            }
        }
    }
    let mut b = vec![0.0; grid.n_nodes()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            b[grid.idx(i, j)] = grid.area_weight(i, j) * rhs.get(i, j);
        }
    }
    let x = match settings.method {
        SolveMethod::Direct => BandedCholesky::factor(&matrix)?.solve(&b),
        SolveMethod::ConjugateGradient => {
            pcg(&matrix, &b, settings.rel_tol, settings.max_iters, false)?
        }
    };
    ScalarField::from_values(grid, x)
}

// Interior point-form rows of -div(coeff grad .) plus the couplings of
// interior rows to boundary values.
fn assemble_dirichlet(grid: &Grid2D, coeff: &ScalarField) -> (Csr, Vec<(usize, usize, f64)>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let rx = 1.0 / (grid.hx() * grid.hx());
    let ry = 1.0 / (grid.hy() * grid.hy());
    let n_int = (nx - 2) * (ny - 2);
    let int_idx = |i: usize, j: usize| (j - 1) * (nx - 2) + (i - 1);

    // ring index by flat node index, for boundary couplings
    let mut ring_of = vec![usize::MAX; grid.n_nodes()];
    for (k, (i, j)) in grid.boundary_nodes().enumerate() {
        ring_of[grid.idx(i, j)] = k;
    }

    let mut builder = CsrBuilder::new(n_int);
    let mut couplings = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let row = int_idx(i, j);
            let c0 = coeff.get(i, j);
            let ts = harmonic_mean(c0, coeff.get(i, j - 1)) * ry;
            let tw = harmonic_mean(c0, coeff.get(i - 1, j)) * rx;
            let te = harmonic_mean(c0, coeff.get(i + 1, j)) * rx;
            let tn = harmonic_mean(c0, coeff.get(i, j + 1)) * ry;
            let diag = ts + tw + te + tn;
            // columns in ascending order: S, W, diag, E, N
            if j - 1 >= 1 {
                builder.push(int_idx(i, j - 1), -ts);
            } else {
                couplings.push((row, ring_of[grid.idx(i, j - 1)], ts));
            }
            if i - 1 >= 1 {
                builder.push(int_idx(i - 1, j), -tw);
            } else {
                couplings.push((row, ring_of[grid.idx(i - 1, j)], tw));
            }
            builder.push(row, diag);
            if i + 1 <= nx - 2 {
                builder.push(int_idx(i + 1, j), -te);
            } else {
                couplings.push((row, ring_of[grid.idx(i + 1, j)], te));
            }
            if j + 1 <= ny - 2 {
                builder.push(int_idx(i, j + 1), -tn);
            } else {
                couplings.push((row, ring_of[grid.idx(i, j + 1)], tn));
            }
            builder.finish_row();
        }
    }
    (builder.build(), couplings)
}

// Volume-scaled finite-volume form of -div(coeff grad .) over all nodes;
// symmetric positive semidefinite with the constants as nullspace.
fn assemble_neumann(grid: &Grid2D, coeff: &ScalarField) -> Csr {
    let (nx, ny) = (grid.nx(), grid.ny());
    let n = grid.n_nodes();
    let half = |border: bool| if border { 0.5 } else { 1.0 };

    // conductances of the west/south faces of each node
    let mut tx = vec![0.0; n]; // face between (i-1,j) and (i,j)
    let mut ty = vec![0.0; n]; // face between (i,j-1) and (i,j)
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            if i > 0 {
                let len = grid.hy() * half(j == 0 || j == ny - 1);
                tx[k] = harmonic_mean(coeff.get(i - 1, j), coeff.get(i, j)) * len / grid.hx();
            }
            if j > 0 {
                let len = grid.hx() * half(i == 0 || i == nx - 1);
                ty[k] = harmonic_mean(coeff.get(i, j - 1), coeff.get(i, j)) * len / grid.hy();
            }
        }
    }

    let mut builder = CsrBuilder::new(n);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            let ts = ty[k];
            let tw = tx[k];
            let te = if i + 1 < nx { tx[k + 1] } else { 0.0 };
            let tn = if j + 1 < ny { ty[k + nx] } else { 0.0 };
            if j > 0 {
                builder.push(k - nx, -ts);
            }
            if i > 0 {
                builder.push(k - 1, -tw);
            }
            builder.push(k, ts + tw + te + tn);
            if i + 1 < nx {
                builder.push(k + 1, -te);
            }
            if j + 1 < ny {
                builder.push(k + nx, -tn);
            }
            builder.finish_row();
        }
    }
    builder.build()
}

/// Visit every grid face `(a, b)` (x-faces then y-faces) together with the
/// inverse squared spacing of its axis; used by the discrete adjoint of the
/// conductivity operator.
pub(crate) fn for_each_face(grid: &Grid2D, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let rx = 1.0 / (grid.hx() * grid.hx());
    let ry = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        for i in 0..nx - 1 {
            visit(grid.idx(i, j), grid.idx(i + 1, j), rx);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            visit(grid.idx(i, j), grid.idx(i, j + 1), ry);
        }
    }
}

/// Partial derivatives of the harmonic mean `2ab/(a+b)` with respect to both
/// arguments.
pub(crate) fn harmonic_mean_partials(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (2.0 * b * b / (s * s), 2.0 * a * a / (s * s))
}
