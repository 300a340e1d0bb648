//! The two forward operators and their adjoint machinery.
//!
//! The potential problem maps a source `u` to the Neumann trace of the
//! Dirichlet solution of `-div(sigma grad w) = u`; the conductivity problem
//! maps a coefficient `u` to boundary data of `-div(u grad w) = f`. Each
//! operator offers two adjoint routes: the table-literal recipe and the
//! exact transpose of the assembled discrete forward map.

use alloc::vec;
use alloc::vec::Vec;

use crate::elliptic::{
    for_each_face, harmonic_mean_partials, solve_laplace_dirichlet, EllipticSystem,
    SolverSettings,
};
use crate::error::{Error, Result};
use crate::grid::{
    boundary_trace, gradient, normal_derivative, normal_stencil, BoundaryTrace, Grid2D,
    ScalarField,
};
use crate::levelset::AdmissibleBox;

/// How `F'(.)^* r` is evaluated.
///
/// `Paper` follows the published iteration verbatim: the harmonic extension
/// of the residual for the potential problem, and `grad w . grad v` with a
/// conormal-flux solve for the conductivity problem. `Discrete` is the exact
/// adjoint of the assembled discrete forward map and satisfies the adjoint
/// identity to solver precision; it is the default for optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMode {
    Paper,
    Discrete,
}

/// Inverse potential problem: recover the source `u` in
/// `-div(sigma grad w) = u`, `w = g` on the boundary, from `dw/dnu`.
pub struct PotentialProblem {
    grid: Grid2D,
    sigma: ScalarField,
    g: BoundaryTrace,
    settings: SolverSettings,
    system: EllipticSystem,
}

impl PotentialProblem {
    pub fn new(sigma: ScalarField, g: BoundaryTrace, settings: SolverSettings) -> Result<Self> {
        if sigma.grid() != g.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = sigma.grid();
        let system = EllipticSystem::dirichlet(sigma.clone(), settings)?;
        Ok(Self { grid, sigma, g, settings, system })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn sigma(&self) -> &ScalarField {
        &self.sigma
    }

    pub fn boundary_data(&self) -> &BoundaryTrace {
        &self.g
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }
}

/// Inverse conductivity problem: recover `u` in `-div(u grad w) = f`,
/// `w = g` on the boundary, from boundary measurements of `w`.
pub struct ConductivityProblem {
    grid: Grid2D,
    f: ScalarField,
    g: BoundaryTrace,
    bounds: AdmissibleBox,
    settings: SolverSettings,
    /// Measure the literal Dirichlet trace of `w` instead of the Neumann
    /// trace. Under the imposed Dirichlet data this trace is identically `g`
    /// and carries no information; kept for fidelity runs.
    pub literal_trace: bool,
}

impl ConductivityProblem {
    pub fn new(
        f: ScalarField,
        g: BoundaryTrace,
        bounds: AdmissibleBox,
        settings: SolverSettings,
    ) -> Result<Self> {
        if f.grid() != g.grid() {
            return Err(Error::GridMismatch);
        }
        if !(bounds.lower() > 0.0) {
            return Err(Error::InvalidParameter("conductivity box needs m > 0"));
        }
        Ok(Self { grid: f.grid(), f, g, bounds, settings, literal_trace: false })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn bounds(&self) -> AdmissibleBox {
        self.bounds
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn boundary_data(&self) -> &BoundaryTrace {
        &self.g
    }
}

/// Scatter of the measurement stencil: computes `T^T W r` as a full field,
/// where `T` is the outward-normal-derivative extraction and `W` the
/// arc-length weights of the boundary inner product.
fn trace_adjoint_scatter(grid: &Grid2D, r: &BoundaryTrace) -> ScalarField {
    let mut out = ScalarField::zeros(*grid);
    let mut stencil = Vec::with_capacity(6);
    for (k, (i, j)) in grid.boundary_nodes().enumerate() {
        let weighted = grid.ds_weight(i, j) * r.values()[k];
        normal_stencil(grid, i, j, &mut stencil);
        for &(node, c) in &stencil {
            out.values_mut()[node] += c * weighted;
        }
    }
    out
}

// interior part of a full field, in interior row-major order
fn restrict_interior(grid: &Grid2D, f: &ScalarField) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Vec::with_capacity((nx - 2) * (ny - 2));
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            out.push(f.get(i, j));
        }
    }
    out
}

// embed interior values into a zero field, then divide by the quadrature
// weights so the result pairs correctly under the weighted inner product
fn embed_as_gradient(grid: &Grid2D, interior: &[f64]) -> ScalarField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = ScalarField::zeros(*grid);
    let mut k = 0;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            out.set(i, j, interior[k] / grid.area_weight(i, j));
            k += 1;
        }
    }
    out
}

/// Forward potential operator: returns the measured Neumann trace together
/// with the potential `w`, so iterations can reuse the field.
pub fn f1_forward(
    u: &ScalarField,
    prob: &PotentialProblem,
) -> Result<(BoundaryTrace, ScalarField)> {
    if u.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    let w = prob.system.solve_with(u, &prob.g)?;
    Ok((normal_derivative(&w), w))
}

/// Adjoint of the potential operator's derivative applied to a residual
/// trace. `Paper` returns the plain harmonic extension of the residual;
/// `Discrete` returns the exact transpose of the discrete `u -> dw/dnu` map
/// with respect to the quadrature inner products.
pub fn f1_adjoint(
    r: &BoundaryTrace,
    prob: &PotentialProblem,
    mode: AdjointMode,
) -> Result<ScalarField> {
    if r.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    match mode {
        AdjointMode::Paper => solve_laplace_dirichlet(r, prob.settings),
        AdjointMode::Discrete => {
            let scatter = trace_adjoint_scatter(&prob.grid, r);
            let b = restrict_interior(&prob.grid, &scatter);
            let x = prob.system.solve_interior(&b)?;
            Ok(embed_as_gradient(&prob.grid, &x))
        }
    }
}

/// Forward conductivity operator: solves `-div(u grad w) = f`, `w = g`, and
/// measures the Neumann trace by default (the literal Dirichlet trace is
/// available through [`ConductivityProblem::literal_trace`]).
pub fn f2_forward(
    u: &ScalarField,
    prob: &ConductivityProblem,
) -> Result<(BoundaryTrace, ScalarField)> {
    if u.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    const TOL: f64 = 1e-9;
    for &v in u.values() {
        if v < prob.bounds.lower() - TOL || v > prob.bounds.upper() + TOL {
            return Err(Error::BoxViolation { value: v });
        }
    }
    let system = EllipticSystem::dirichlet(u.clone(), prob.settings)?;
    let w = system.solve_with(&prob.f, &prob.g)?;
    let y = if prob.literal_trace { boundary_trace(&w) } else { normal_derivative(&w) };
    Ok((y, w))
}

/// Table-literal adjoint for the conductivity problem: solve the conormal
/// flux problem `div(u grad v) = 0`, `u dv/dnu = r`, and return the raw
/// pointwise product `grad w . grad v`. Sign and scale are formal; the
/// iteration orients the result through its sign convention.
pub fn f2_adjoint_gradient(
    u: &ScalarField,
    w: &ScalarField,
    r: &BoundaryTrace,
    prob: &ConductivityProblem,
) -> Result<ScalarField> {
    if u.grid() != prob.grid || w.grid() != prob.grid || r.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    let v = EllipticSystem::neumann(u.clone(), prob.settings)?.solve_flux(r)?;
    let gw = gradient(w);
    let gv = gradient(&v);
    let mut out = ScalarField::zeros(prob.grid);
    for k in 0..prob.grid.n_nodes() {
        out.values_mut()[k] = gw.x[k] * gv.x[k] + gw.y[k] * gv.y[k];
    }
    Ok(out)
}

/// Exact gradient of the discrete misfit `1/2 || meas(u) - d ||^2` for the
/// conductivity problem, by the adjoint-state method through the assembled
/// flux-form system and the harmonic-mean face coefficients. `w` must be the
/// forward solution for `u` and `r` the measured residual.
pub fn f2_discrete_gradient(
    u: &ScalarField,
    w: &ScalarField,
    r: &BoundaryTrace,
    prob: &ConductivityProblem,
) -> Result<ScalarField> {
    if u.grid() != prob.grid || w.grid() != prob.grid || r.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    if prob.literal_trace {
        // the imposed Dirichlet data makes the literal trace insensitive to u
        return Ok(ScalarField::zeros(prob.grid));
    }
    let grid = prob.grid;
    let system = EllipticSystem::dirichlet(u.clone(), prob.settings)?;
    let scatter = trace_adjoint_scatter(&grid, r);
    let b = restrict_interior(&grid, &scatter);
    let lambda_int = system.solve_interior(&b)?;

    // zero-extended adjoint field
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut lambda = vec![0.0; grid.n_nodes()];
    let mut k = 0;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            lambda[grid.idx(i, j)] = lambda_int[k];
            k += 1;
        }
    }

    let mut accum = vec![0.0; grid.n_nodes()];
    for_each_face(&grid, |a, b, inv_h2| {
        let dl = lambda[a] - lambda[b];
        if dl == 0.0 {
            return;
        }
        let dw = w.values()[a] - w.values()[b];
        let c = -dl * dw * inv_h2;
        let (da, db) = harmonic_mean_partials(u.values()[a], u.values()[b]);
        accum[a] += c * da;
        accum[b] += c * db;
    });
    let mut out = ScalarField::zeros(grid);
    for j in 0..ny {
        for i in 0..nx {
            let idx = grid.idx(i, j);
            out.values_mut()[idx] = accum[idx] / grid.area_weight(i, j);
        }
    }
    Ok(out)
}

/// The problem being inverted, dispatching forwards and adjoints.
pub enum Problem {
    Potential(PotentialProblem),
    Conductivity(ConductivityProblem),
}

impl Problem {
    pub fn grid(&self) -> Grid2D {
        match self {
            Problem::Potential(p) => p.grid,
            Problem::Conductivity(p) => p.grid,
        }
    }

    /// Forward map: measurement trace plus the PDE solution it came from.
    pub fn forward(&self, u: &ScalarField) -> Result<(BoundaryTrace, ScalarField)> {
        match self {
            Problem::Potential(p) => f1_forward(u, p),
            Problem::Conductivity(p) => f2_forward(u, p),
        }
    }

    /// `F'(u)^* residual` in the selected adjoint mode; `w` is the forward
    /// field belonging to `u`.
    pub fn adjoint_gradient(
        &self,
        u: &ScalarField,
        w: &ScalarField,
        residual: &BoundaryTrace,
        mode: AdjointMode,
    ) -> Result<ScalarField> {
        match (self, mode) {
            (Problem::Potential(p), _) => f1_adjoint(residual, p, mode),
            (Problem::Conductivity(p), AdjointMode::Paper) => {
                f2_adjoint_gradient(u, w, residual, p)
            }
            (Problem::Conductivity(p), AdjointMode::Discrete) => {
                f2_discrete_gradient(u, w, residual, p)
            }
        }
    }
}
