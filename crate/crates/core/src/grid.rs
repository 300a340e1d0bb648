//! Uniform tensor grids, nodal fields, second-order difference operators,
//! quadrature norms and boundary extraction.
//!
//! Nodes are stored row-major: index `j * nx + i` holds the node at
//! `(x0 + i*hx, y0 + j*hy)`. The boundary is the outermost ring of nodes,
//! ordered counter-clockwise starting at `(x0, y0)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform node-centered grid on the rectangle `[x0,x1] x [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    x0: f64,
    y0: f64,
}

impl Grid2D {
    /// Grid with `nx * ny` nodes covering `[x0,x1] x [y0,y1]`.
    pub fn new(nx: usize, ny: usize, extents: [f64; 4]) -> Result<Self> {
        let [x0, x1, y0, y1] = extents;
        if nx < 3 || ny < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let hx = (x1 - x0) / (nx - 1) as f64;
        let hy = (y1 - y0) / (ny - 1) as f64;
        if !(hx > 0.0) || !(hy > 0.0) || !hx.is_finite() || !hy.is_finite() {
            return Err(Error::InvalidParameter("grid extents"));
        }
        Ok(Self { nx, ny, hx, hy, x0, y0 })
    }

    /// Grid on the unit square, the default domain.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, [0.0, 1.0, 0.0, 1.0])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of node `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Number of boundary nodes, `2(nx-1) + 2(ny-1)`.
    pub fn n_boundary(&self) -> usize {
        2 * (self.nx - 1) + 2 * (self.ny - 1)
    }

    /// Boundary nodes in canonical counter-clockwise order starting at
    /// `(x0, y0)`: bottom, right, top, left; every edge owns its first corner.
    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        let bottom = (0..nx - 1).map(move |i| (i, 0));
        let right = (0..ny - 1).map(move |j| (nx - 1, j));
        let top = (1..nx).rev().map(move |i| (i, ny - 1));
        let left = (1..ny).rev().map(move |j| (0, j));
        bottom.chain(right).chain(top).chain(left)
    }

    /// Trapezoidal quadrature weight of node `(i, j)` for area integrals.
    #[inline]
    pub fn area_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    /// Arc-length quadrature weight of a boundary node for `L2(dOmega)`.
    #[inline]
    pub fn ds_weight(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.is_boundary(i, j));
        let corner_x = i == 0 || i == self.nx - 1;
        let corner_y = j == 0 || j == self.ny - 1;
        if corner_x && corner_y {
            0.5 * (self.hx + self.hy)
        } else if corner_y {
            self.hx
        } else {
            self.hy
        }
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn domain_area(&self) -> f64 {
        self.hx * (self.nx - 1) as f64 * self.hy * (self.ny - 1) as f64
    }
}

/// Nodal scalar field on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.n_nodes()] }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n_nodes()] }
    }

    /// Sample `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, values }
    }

    /// Wrap raw row-major values; rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self { grid: self.grid, values })
    }

    /// `self += c * other`.
    pub fn scaled_add(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.values.iter_mut() {
            *v *= c;
        }
    }

    /// Trapezoidal inner product over the domain.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let g = self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                acc += g.area_weight(i, j) * self.values[k] * other.values[k];
            }
        }
        acc
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Area-weighted mean over the domain.
    pub fn mean(&self) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                acc += g.area_weight(i, j) * self.values[g.idx(i, j)];
            }
        }
        acc / g.domain_area()
    }

    /// Overwrite boundary nodes with the trace values.
    pub fn apply_boundary(&mut self, trace: &BoundaryTrace) -> Result<()> {
        if self.grid != trace.grid {
            return Err(Error::GridMismatch);
        }
        for (k, (i, j)) in self.grid.boundary_nodes().enumerate() {
            let idx = self.grid.idx(i, j);
            self.values[idx] = trace.values[k];
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Quadrature norm of the field.
    pub fn norm(&self, kind: NormKind) -> f64 {
        let g = self.grid;
        match kind {
            NormKind::L1 => {
                let mut acc = 0.0;
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        acc += g.area_weight(i, j) * libm::fabs(self.values[g.idx(i, j)]);
                    }
                }
                acc
            }
            NormKind::L2 => libm::sqrt(self.inner(self)),
            NormKind::H1 => {
                let grad = gradient(self);
                let mut acc = self.inner(self);
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        let k = g.idx(i, j);
                        acc += g.area_weight(i, j)
                            * (grad.x[k] * grad.x[k] + grad.y[k] * grad.y[k]);
                    }
                }
                libm::sqrt(acc)
            }
            NormKind::TvSmoothed(beta) => {
                debug_assert!(beta > 0.0);
                let grad = gradient(self);
                let cell = g.cell_area();
                let mut acc = 0.0;
                for k in 0..g.n_nodes() {
                    let m2 = grad.x[k] * grad.x[k] + grad.y[k] * grad.y[k];
                    acc += (libm::sqrt(m2 + beta * beta) - beta) * cell;
                }
                acc
            }
        }
    }
}

/// Norm selector for [`ScalarField::norm`]. `TvSmoothed(beta)` is the
/// differentiable total-variation surrogate; constants map to exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    H1,
    TvSmoothed(f64),
}

/// Two-component nodal field, e.g. a discrete gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        let n = grid.n_nodes();
        Self { grid, x: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn from_components(fx: &ScalarField, fy: &ScalarField) -> Result<Self> {
        if fx.grid != fy.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid: fx.grid, x: fx.values.clone(), y: fy.values.clone() })
    }
}

/// Values on the boundary ring, in the canonical counter-clockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid2D,
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.n_boundary()] }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n_boundary()] }
    }

    /// Sample `f(x, y)` along the boundary ring.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.boundary_nodes().map(|(i, j)| f(grid.x(i), grid.y(j))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_boundary() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `L2(dOmega)` inner product with arc-length weights.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut acc = 0.0;
        for (k, (i, j)) in self.grid.boundary_nodes().enumerate() {
            acc += self.grid.ds_weight(i, j) * self.values[k] * other.values[k];
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.inner(self))
    }

    /// Arc-length weighted mean over the ring.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        let mut len = 0.0;
        for (k, (i, j)) in self.grid.boundary_nodes().enumerate() {
            let w = self.grid.ds_weight(i, j);
            acc += w * self.values[k];
            len += w;
        }
        acc / len
    }

    pub fn scaled_add(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += c * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

// One-dimensional second-order first derivative along a line of samples:
// central in the interior, one-sided at the two ends.
#[inline]
fn d1(prev: f64, next: f64, h: f64) -> f64 {
    (next - prev) / (2.0 * h)
}

#[inline]
fn d1_forward(f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
}

/// Discrete gradient: central differences inside, one-sided second-order
/// differences on the boundary. Exact for affine fields everywhere and for
/// quadratics at interior nodes.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = VectorField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            out.x[k] = if i == 0 {
                d1_forward(f.values[k], f.values[k + 1], f.values[k + 2], g.hx)
            } else if i == nx - 1 {
                -d1_forward(f.values[k], f.values[k - 1], f.values[k - 2], g.hx)
            } else {
                d1(f.values[k - 1], f.values[k + 1], g.hx)
            };
            out.y[k] = if j == 0 {
                d1_forward(f.values[k], f.values[k + nx], f.values[k + 2 * nx], g.hy)
            } else if j == ny - 1 {
                -d1_forward(f.values[k], f.values[k - nx], f.values[k - 2 * nx], g.hy)
            } else {
                d1(f.values[k - nx], f.values[k + nx], g.hy)
            };
        }
    }
    out
}

/// Discrete divergence with the same stencils as [`gradient`], so that
/// `divergence(gradient(f))` is a consistent wide Laplacian in the interior.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = ScalarField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            let dx = if i == 0 {
                d1_forward(v.x[k], v.x[k + 1], v.x[k + 2], g.hx)
            } else if i == nx - 1 {
                -d1_forward(v.x[k], v.x[k - 1], v.x[k - 2], g.hx)
            } else {
                d1(v.x[k - 1], v.x[k + 1], g.hx)
            };
            let dy = if j == 0 {
                d1_forward(v.y[k], v.y[k + nx], v.y[k + 2 * nx], g.hy)
            } else if j == ny - 1 {
                -d1_forward(v.y[k], v.y[k - nx], v.y[k - 2 * nx], g.hy)
            } else {
                d1(v.y[k - nx], v.y[k + nx], g.hy)
            };
            out.values[k] = dx + dy;
        }
    }
    out
}

/// Five-point Laplacian; boundary nodes use ghost-node reflection
/// (homogeneous Neumann closure).
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = ScalarField::zeros(g);
    let rx = 1.0 / (g.hx * g.hx);
    let ry = 1.0 / (g.hy * g.hy);
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            let fw = if i == 0 { f.values[k + 1] } else { f.values[k - 1] };
            let fe = if i == nx - 1 { f.values[k - 1] } else { f.values[k + 1] };
            let fs = if j == 0 { f.values[k + nx] } else { f.values[k - nx] };
            let fn_ = if j == ny - 1 { f.values[k - nx] } else { f.values[k + nx] };
            out.values[k] =
                rx * (fw - 2.0 * f.values[k] + fe) + ry * (fs - 2.0 * f.values[k] + fn_);
        }
    }
    out
}

/// Smoothed mean-curvature operator `div(grad f / sqrt(|grad f|^2 + beta^2))`.
/// The `beta_tv` floor keeps the unit normal defined where the gradient
/// vanishes.
pub fn curvature_div(f: &ScalarField, beta_tv: f64) -> Result<ScalarField> {
    if !(beta_tv > 0.0) {
        return Err(Error::InvalidParameter("beta_tv must be positive"));
    }
    let mut n = gradient(f);
    for k in 0..f.grid.n_nodes() {
        let mag = libm::sqrt(n.x[k] * n.x[k] + n.y[k] * n.y[k] + beta_tv * beta_tv);
        n.x[k] /= mag;
        n.y[k] /= mag;
    }
    Ok(divergence(&n))
}

/// Copy the boundary ring of a field in canonical order.
pub fn boundary_trace(f: &ScalarField) -> BoundaryTrace {
    let g = f.grid;
    let values = g.boundary_nodes().map(|(i, j)| f.values[g.idx(i, j)]).collect();
    BoundaryTrace { grid: g, values }
}

/// Stencil of the outward normal derivative at boundary node `(i, j)`:
/// second-order one-sided differences, averaged over both normals at corners.
/// Entries are `(flat node index, coefficient)` pushed onto `out`.
pub(crate) fn normal_stencil(g: &Grid2D, i: usize, j: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let (nx, ny) = (g.nx, g.ny);
    let mut sides = 0.0;
    if i == 0 || i == nx - 1 {
        sides += 1.0;
    }
    if j == 0 || j == ny - 1 {
        sides += 1.0;
    }
    let w = 1.0 / sides;
    let k = g.idx(i, j);
    // coefficients of (3 f0 - 4 f1 + f2) / (2h) along the inward direction
    if i == 0 {
        let c = w / (2.0 * g.hx);
        out.push((k, 3.0 * c));
        out.push((k + 1, -4.0 * c));
        out.push((k + 2, c));
    } else if i == nx - 1 {
        let c = w / (2.0 * g.hx);
        out.push((k, 3.0 * c));
        out.push((k - 1, -4.0 * c));
        out.push((k - 2, c));
    }
    if j == 0 {
        let c = w / (2.0 * g.hy);
        out.push((k, 3.0 * c));
        out.push((k + nx, -4.0 * c));
        out.push((k + 2 * nx, c));
    } else if j == ny - 1 {
        let c = w / (2.0 * g.hy);
        out.push((k, 3.0 * c));
        out.push((k - nx, -4.0 * c));
        out.push((k - 2 * nx, c));
    }
    debug_assert!(!out.is_empty());
}

/// Outward normal derivative on the boundary ring; corner nodes average the
/// two adjacent edge normals.
pub fn normal_derivative(f: &ScalarField) -> BoundaryTrace {
    let g = f.grid;
    let mut stencil = Vec::with_capacity(6);
    let values = g
        .boundary_nodes()
        .map(|(i, j)| {
            normal_stencil(&g, i, j, &mut stencil);
            stencil.iter().map(|&(k, c)| c * f.values[k]).sum()
        })
        .collect();
    BoundaryTrace { grid: g, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::unit_square(n, n).unwrap()
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(matches!(Grid2D::unit_square(2, 5), Err(Error::GridTooSmall { .. })));
        assert!(Grid2D::new(5, 5, [0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn boundary_ring_order_and_length() {
        let g = Grid2D::unit_square(4, 3).unwrap();
        let ring: Vec<_> = g.boundary_nodes().collect();
        assert_eq!(ring.len(), g.n_boundary());
        assert_eq!(ring.len(), 2 * 3 + 2 * 2);
        assert_eq!(ring[0], (0, 0));
        assert_eq!(ring[1], (1, 0));
        // last node is just above the start, closing the ring counter-clockwise
        assert_eq!(*ring.last().unwrap(), (0, 1));
        let unique: std::collections::HashSet<_> = ring.iter().collect();
        assert_eq!(unique.len(), ring.len());
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = ScalarField::constant(grid(9), 3.25);
        let v = gradient(&f);
        assert!(v.x.iter().chain(v.y.iter()).all(|&c| c == 0.0));
    }

    #[test]
    fn gradient_exact_for_affine() {
        let f = ScalarField::from_fn(grid(11), |x, y| 2.0 * x - 0.5 * y + 1.0);
        let v = gradient(&f);
        for k in 0..f.grid().n_nodes() {
            assert!((v.x[k] - 2.0).abs() < 1e-13);
            assert!((v.y[k] + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_exact_for_quadratic_interior() {
        let g = grid(17);
        let f = ScalarField::from_fn(g, |x, _| x * x);
        let v = gradient(&f);
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                let k = g.idx(i, j);
                assert!((v.x[k] - 2.0 * g.x(i)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn divergence_of_zero_and_affine() {
        let g = grid(9);
        let zero = VectorField::zeros(g);
        assert!(divergence(&zero).values().iter().all(|&v| v == 0.0));

        let vx = ScalarField::from_fn(g, |x, _| x);
        let vy = ScalarField::from_fn(g, |_, y| y);
        let v = VectorField::from_components(&vx, &vy).unwrap();
        let d = divergence(&v);
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                assert!((d.get(i, j) - 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn div_grad_of_paraboloid_is_four() {
        let g = grid(21);
        let f = ScalarField::from_fn(g, |x, y| x * x + y * y);
        let d = divergence(&gradient(&f));
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                assert!((d.get(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_of_constant_and_paraboloid() {
        let g = grid(17);
        let c = ScalarField::constant(g, -4.0);
        let lc = laplacian(&c);
        assert!(lc.values().iter().all(|&v| v.abs() < 1e-12));

        let f = ScalarField::from_fn(g, |x, y| x * x + y * y);
        let lf = laplacian(&f);
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                assert!((lf.get(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_eigenfunction_interior_accuracy() {
        let g = grid(64);
        let pi = core::f64::consts::PI;
        let f = ScalarField::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
        let lf = laplacian(&f);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                let expect = -2.0 * pi * pi * f.get(i, j);
                num += (lf.get(i, j) - expect).powi(2);
                den += expect.powi(2);
            }
        }
        assert!((num / den).sqrt() < 1e-2);
    }

    #[test]
    fn curvature_rejects_bad_beta_and_kills_constants() {
        let f = ScalarField::constant(grid(9), 1.0);
        assert!(curvature_div(&f, 0.0).is_err());
        let c = curvature_div(&f, 1e-6).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn curvature_of_planar_ramp_vanishes() {
        let f = ScalarField::from_fn(grid(33), |x, _| x);
        let c = curvature_div(&f, 1e-8).unwrap();
        let g = f.grid();
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                assert!(c.get(i, j).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn curvature_of_circle_sdf_matches_radius() {
        let g = grid(128);
        let r = 0.3;
        // positive outside so that the curvature comes out as +1/R
        let f = ScalarField::from_fn(g, |x, y| ((x - 0.5).hypot(y - 0.5)) - r);
        let c = curvature_div(&f, 1e-8).unwrap();
        let band = 2.0 * g.hx();
        let mut worst: f64 = 0.0;
        let mut seen = 0;
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                if f.get(i, j).abs() < band {
                    worst = worst.max((c.get(i, j) - 1.0 / r).abs() / (1.0 / r));
                    seen += 1;
                }
            }
        }
        assert!(seen > 100);
        assert!(worst < 0.10, "relative curvature error {worst}");
    }

    #[test]
    fn norms_of_zero_and_one() {
        let g = grid(33);
        let zero = ScalarField::zeros(g);
        for kind in [NormKind::L1, NormKind::L2, NormKind::H1, NormKind::TvSmoothed(1e-6)] {
            assert_eq!(zero.norm(kind), 0.0);
        }
        let one = ScalarField::constant(g, 1.0);
        assert!((one.norm(NormKind::L1) - 1.0).abs() < 1e-13);
        assert!((one.norm(NormKind::L2) - 1.0).abs() < 1e-13);
        assert_eq!(one.norm(NormKind::TvSmoothed(1e-6)), 0.0);
    }

    #[test]
    fn tv_of_smoothed_disk_step_recovers_perimeter() {
        let g = grid(128);
        let r = 0.3;
        let eps = 2.0 * g.hx();
        // smoothed indicator of the disk, ramp of width eps across the edge
        let f = ScalarField::from_fn(g, |x, y| {
            let phi = r - (x - 0.5).hypot(y - 0.5);
            (1.0 + phi / eps).clamp(0.0, 1.0)
        });
        let tv = f.norm(NormKind::TvSmoothed(1e-6));
        let perimeter = 2.0 * core::f64::consts::PI * r;
        assert!((tv - perimeter).abs() / perimeter < 0.10, "tv {tv} vs {perimeter}");
    }

    #[test]
    fn boundary_trace_values_and_roundtrip() {
        let g = grid(7);
        let c = ScalarField::constant(g, 2.5);
        assert!(boundary_trace(&c).values().iter().all(|&v| v == 2.5));

        let f = ScalarField::from_fn(g, |x, _| x);
        let t = boundary_trace(&f);
        for (k, (i, _)) in g.boundary_nodes().enumerate() {
            assert_eq!(t.values()[k], g.x(i));
        }

        // embed then extract is the identity, bit for bit
        let trace = BoundaryTrace::from_fn(g, |x, y| 3.0 * x - y);
        let mut field = ScalarField::zeros(g);
        field.apply_boundary(&trace).unwrap();
        assert_eq!(boundary_trace(&field), trace);
    }

    #[test]
    fn normal_derivative_constant_and_affine() {
        let g = grid(9);
        let c = ScalarField::constant(g, 7.0);
        assert!(normal_derivative(&c).values().iter().all(|&v| v.abs() < 1e-12));

        let f = ScalarField::from_fn(g, |x, _| x);
        let t = normal_derivative(&f);
        for (k, (i, j)) in g.boundary_nodes().enumerate() {
            let corner = (i == 0 || i == g.nx() - 1) && (j == 0 || j == g.ny() - 1);
            if corner {
                continue;
            }
            let expect = if i == 0 {
                -1.0
            } else if i == g.nx() - 1 {
                1.0
            } else {
                0.0
            };
            assert!((t.values()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_derivative_harmonic_oracle() {
        let g = grid(128);
        let pi = core::f64::consts::PI;
        let f = ScalarField::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sinh() / pi.sinh());
        let t = normal_derivative(&f);
        for (k, (i, j)) in g.boundary_nodes().enumerate() {
            if j == 0 && i > 0 && i < g.nx() - 1 {
                let expect = -pi * (pi * g.x(i)).sin() / pi.sinh();
                if expect.abs() > 1e-2 {
                    let rel = (t.values()[k] - expect).abs() / expect.abs();
                    assert!(rel < 0.02, "node {i}: rel error {rel}");
                }
            }
        }
    }

    #[test]
    fn trace_norm_uses_arc_length_weights() {
        let g = grid(5);
        let one = BoundaryTrace::constant(g, 1.0);
        // perimeter of the unit square
        assert!((one.inner(&one) - 4.0).abs() < 1e-13);
        assert!((one.mean() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn div_grad_consistent_with_laplacian_under_refinement() {
        let pi = core::f64::consts::PI;
        let smooth = |x: f64, y: f64| (pi * x).sin() * (0.5 * pi * y).cos();
        let err = |n: usize| {
            let g = grid(n);
            let f = ScalarField::from_fn(g, smooth);
            let a = divergence(&gradient(&f));
            let b = laplacian(&f);
            let mut acc = 0.0;
            for j in 1..g.ny() - 1 {
                for i in 1..g.nx() - 1 {
                    acc += (a.get(i, j) - b.get(i, j)).powi(2) * g.cell_area();
                }
            }
            acc.sqrt()
        };
        let (e1, e2, e3) = (err(17), err(33), err(65));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((2.5..6.0).contains(&ratio), "refinement ratio {ratio}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        const N: usize = 7;

        fn field_strategy() -> impl Strategy<Value = ScalarField> {
            proptest::collection::vec(-10.0f64..10.0, N * N).prop_map(|v| {
                ScalarField::from_values(Grid2D::unit_square(N, N).unwrap(), v).unwrap()
            })
        }

        proptest! {
            #[test]
            fn differential_ops_are_linear(
                f in field_strategy(),
                g in field_strategy(),
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
            ) {
                let combo = f.zip_map(&g, |u, v| a * u + b * v).unwrap();
                let lhs = laplacian(&combo);
                let mut rhs = laplacian(&f);
                rhs.scale(a);
                rhs.scaled_add(b, &laplacian(&g));
                for k in 0..combo.grid().n_nodes() {
                    prop_assert!((lhs.values()[k] - rhs.values()[k]).abs() < 1e-9);
                }

                let gl = gradient(&combo);
                let gf = gradient(&f);
                let gg = gradient(&g);
                for k in 0..combo.grid().n_nodes() {
                    prop_assert!((gl.x[k] - (a * gf.x[k] + b * gg.x[k])).abs() < 1e-10);
                    prop_assert!((gl.y[k] - (a * gf.y[k] + b * gg.y[k])).abs() < 1e-10);
                }
            }

            #[test]
            fn l2_norm_triangle_and_homogeneity(
                f in field_strategy(),
                g in field_strategy(),
                c in -4.0f64..4.0,
            ) {
                let sum = f.zip_map(&g, |u, v| u + v).unwrap();
                prop_assert!(
                    sum.norm(NormKind::L2) <= f.norm(NormKind::L2) + g.norm(NormKind::L2) + 1e-12
                );
                let scaled = f.map(|v| c * v);
                prop_assert!(
                    (scaled.norm(NormKind::L2) - c.abs() * f.norm(NormKind::L2)).abs() < 1e-10
                );
            }

            #[test]
            fn boundary_ops_commute_with_negation(f in field_strategy()) {
                let neg = f.map(|v| -v);
                let t1 = normal_derivative(&neg);
                let t2 = normal_derivative(&f);
                for k in 0..t1.len() {
                    prop_assert!((t1.values()[k] + t2.values()[k]).abs() < 1e-11);
                }
                let b1 = boundary_trace(&neg);
                let b2 = boundary_trace(&f);
                for k in 0..b1.len() {
                    prop_assert!((b1.values()[k] + b2.values()[k]).abs() < 1e-12);
                }
            }
        }
    }
}
