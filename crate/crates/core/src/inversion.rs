//! The regularized reconstruction: objective evaluation, optimality-system
//! L-terms, the explicit and semi-implicit update schemes and the outer
//! iteration with discrepancy stopping.

use alloc::vec::Vec;

use crate::elliptic::{solve_screened_neumann, EllipticSystem, SolverSettings};
use crate::error::{Error, Result};
use crate::grid::{curvature_div, gradient, laplacian, BoundaryTrace, NormKind, ScalarField};
use crate::levelset::{
    evaluate_r, heaviside_deriv_field, redistance, AdmissibleBox, Betas, LevelSetState,
    PenaltyTerms,
};
use crate::operators::{AdjointMode, Problem};

const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 20;

/// A-priori rule `alpha(delta) = c * delta^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRule {
    pub c: f64,
    pub p: f64,
}

impl AlphaRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter("alpha rule needs c > 0"));
        }
        if !(self.p > 0.0 && self.p < 2.0) {
            return Err(Error::InvalidParameter("alpha rule needs p in (0, 2)"));
        }
        Ok(())
    }
}

/// Which update rule drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateScheme {
    /// Pointwise gradient step with time increment `1/alpha`.
    Explicit,
    /// Screened-Poisson smoothing of the level-set update and one lagged
    /// diffusivity step for each level function.
    SemiImplicit,
}

/// All regularization, update and stopping parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    /// Regularization weight; overridden by `alpha_rule` when noise is present.
    pub alpha: f64,
    pub alpha_rule: Option<AlphaRule>,
    pub betas: Betas,
    /// Initial smoothing width of the Heaviside band.
    pub eps0: f64,
    /// Geometric factor applied to `eps` each iteration; 1 keeps it fixed.
    pub eps_decay: f64,
    /// Smoothing floor inside total-variation terms and curvature.
    pub beta_tv: f64,
    pub scheme: UpdateScheme,
    /// `true` orients updates along the calibrated descent direction of the
    /// objective; `false` flips to the opposite orientation. The printed
    /// optimality system fixes only the magnitude of the updates, not a
    /// descent sign, so the orientation is a run-time choice.
    pub sign_flip: bool,
    /// Halve the step until the objective stops increasing (at most 20 times).
    pub backtracking: bool,
    /// Complete the explicit update direction with the gradients of the
    /// penalty terms. The printed update rule differentiates only the data
    /// and interface terms and therefore drives each unknown past the point
    /// where its penalty balances the data force, where the joint line
    /// search dies; with the completion the explicit scheme is a plain
    /// descent method for the full objective. Off reproduces the printed
    /// rule verbatim.
    pub full_gradient: bool,
    /// Discrepancy factor; the run stops once the residual norm drops below
    /// `tau * delta`.
    pub tau: f64,
    pub max_iters: usize,
    /// Rebuild the level-set function as a signed distance every this many
    /// iterations; 0 disables the hook. Reinitialization keeps the
    /// transition band resolvable over long runs at the price of small
    /// objective jumps when it fires.
    pub reinit_every: usize,
    pub adjoint_mode: AdjointMode,
    /// Admissible box for both level functions.
    pub levels_box: AdmissibleBox,
    pub solver: SolverSettings,
}

impl InversionConfig {
    /// Calibrated defaults; `eps0` must resolve the grid (commonly
    /// `2 * max(hx, hy)`).
    pub fn new(levels_box: AdmissibleBox, eps0: f64) -> Self {
        Self {
            alpha: 3e-4,
            alpha_rule: None,
            betas: Betas { beta1: 1e-4, beta2: 0.2, beta3: 1.0 },
            eps0,
            eps_decay: 1.0,
            beta_tv: 1e-6,
            scheme: UpdateScheme::Explicit,
            sign_flip: true,
            backtracking: true,
            full_gradient: true,
            tau: 1.5,
            max_iters: 500,
            reinit_every: 0,
            adjoint_mode: AdjointMode::Discrete,
            levels_box,
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be positive"));
        }
        if let Some(rule) = &self.alpha_rule {
            rule.validate()?;
        }
        Betas::new(self.betas.beta1, self.betas.beta2, self.betas.beta3)?;
        if !(self.betas.beta2 > 0.0 && self.betas.beta3 > 0.0) {
            return Err(Error::InvalidParameter("beta2 and beta3 must be positive"));
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::InvalidParameter("eps0 must be positive"));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::InvalidParameter("eps_decay must be in (0, 1]"));
        }
        if !(self.beta_tv > 0.0) {
            return Err(Error::InvalidParameter("beta_tv must be positive"));
        }
        if !(self.tau > 1.0) {
            return Err(Error::InvalidParameter("tau must exceed 1"));
        }
        self.solver.validate()
    }

    /// The regularization weight actually used for a run: `c * delta^p`
    /// when the rule applies and noise is present, the fixed `alpha`
    /// otherwise (exact data keeps the a-priori weight so the step `1/alpha`
    /// stays finite).
    pub fn resolved_alpha(&self, delta_abs: f64) -> f64 {
        match &self.alpha_rule {
            Some(rule) if delta_abs > 0.0 => rule.c * libm::pow(delta_abs, rule.p),
            _ => self.alpha,
        }
    }
}

/// A-priori information: the level-set prior and both level-value priors,
/// which also serve as the initial iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorData {
    pub phi0: ScalarField,
    pub psi0_1: ScalarField,
    pub psi0_2: ScalarField,
}

impl PriorData {
    pub fn new(phi0: ScalarField, psi0_1: ScalarField, psi0_2: ScalarField) -> Result<Self> {
        if phi0.grid() != psi0_1.grid() || phi0.grid() != psi0_2.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { phi0, psi0_1, psi0_2 })
    }

    /// Default prior: signed distance to a centered disk of radius 0.25 for
    /// the level-set function, mid-box constants for both level values.
    pub fn centered_disk(grid: crate::grid::Grid2D, levels_box: AdmissibleBox) -> Self {
        let cx = 0.5 * (grid.x(0) + grid.x(grid.nx() - 1));
        let cy = 0.5 * (grid.y(0) + grid.y(grid.ny() - 1));
        let phi0 = ScalarField::from_fn(grid, |x, y| {
            0.25 - libm::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy))
        });
        let mid = ScalarField::constant(grid, levels_box.midpoint());
        Self { phi0, psi0_1: mid.clone(), psi0_2: mid }
    }

    /// Initial iterate built from the prior, level values clamped to the box.
    pub fn initial_state(&self, eps: f64, levels_box: &AdmissibleBox) -> Result<LevelSetState> {
        let mut state =
            LevelSetState::new(self.phi0.clone(), self.psi0_1.clone(), self.psi0_2.clone(), eps)?;
        state.clamp_levels(levels_box);
        Ok(state)
    }
}

/// One full evaluation of the Tikhonov objective at an iterate, keeping the
/// forward solve for reuse.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub total: f64,
    pub misfit_sq: f64,
    pub penalties: PenaltyTerms,
    pub coefficient: ScalarField,
    pub field: ScalarField,
    pub measurement: BoundaryTrace,
    pub residual: BoundaryTrace,
    pub residual_norm: f64,
}

/// Evaluate `|F(P_eps(state)) - data|^2 + alpha * R(state)`.
pub fn evaluate_objective(
    state: &LevelSetState,
    data: &BoundaryTrace,
    prob: &Problem,
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<ObjectiveEval> {
    let coefficient = state.coefficient();
    let (measurement, field) = prob.forward(&coefficient)?;
    let mut residual = measurement.clone();
    residual.scaled_add(-1.0, data);
    let misfit_sq = residual.inner(&residual);
    let penalties = evaluate_r(
        state,
        &prior.phi0,
        &prior.psi0_1,
        &prior.psi0_2,
        config.betas,
        config.beta_tv,
    )?;
    let residual_norm = libm::sqrt(misfit_sq);
    Ok(ObjectiveEval {
        total: misfit_sq + config.alpha * penalties.total(),
        misfit_sq,
        penalties,
        coefficient,
        field,
        measurement,
        residual,
        residual_norm,
    })
}

/// Assemble the three optimality-system fields
/// `L   = (psi1-psi2)/beta2 * H'(phi) * G - beta1/(2 beta2) * H'(phi) * curv(H(phi))`,
/// `L_1 = H(phi) * G / (2 beta3)`, `L_2 = (1 - H(phi)) * G / (2 beta3)`,
/// where `G = F'(P_eps)^* residual` in the configured adjoint mode.
pub fn compute_l_terms(
    state: &LevelSetState,
    residual: &BoundaryTrace,
    w: &ScalarField,
    prob: &Problem,
    config: &InversionConfig,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    if !(config.betas.beta2 > 0.0 && config.betas.beta3 > 0.0) {
        return Err(Error::InvalidParameter("beta2 and beta3 must be positive"));
    }
    let coefficient = state.coefficient();
    let g = prob.adjoint_gradient(&coefficient, w, residual, config.adjoint_mode)?;
    let z = state.indicator();
    let hprime = heaviside_deriv_field(&state.phi, state.eps)?;
    let curv = curvature_div(&z, config.beta_tv)?;

    let b2_inv = 1.0 / config.betas.beta2;
    let curv_scale = config.betas.beta1 / (2.0 * config.betas.beta2);
    let mut l_phi = ScalarField::zeros(state.phi.grid());
    for (k, out) in l_phi.values_mut().iter_mut().enumerate() {
        let diff = state.psi1.values()[k] - state.psi2.values()[k];
        *out = diff * b2_inv * hprime.values()[k] * g.values()[k]
            - curv_scale * hprime.values()[k] * curv.values()[k];
    }

    let b3_scale = 1.0 / (2.0 * config.betas.beta3);
    let l_psi1 = z.zip_map(&g, |zk, gk| b3_scale * zk * gk)?;
    let l_psi2 = z.zip_map(&g, |zk, gk| b3_scale * (1.0 - zk) * gk)?;
    Ok((l_phi, l_psi1, l_psi2))
}

/// Result of one accepted update step.
pub struct UpdateOutcome {
    pub state: LevelSetState,
    pub eval: ObjectiveEval,
    /// Scale finally applied to the raw update direction.
    pub step: f64,
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    state: &LevelSetState,
    apply: impl Fn(&LevelSetState, f64) -> LevelSetState,
    base_step: f64,
    current_total: f64,
    data: &BoundaryTrace,
    prob: &Problem,
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<UpdateOutcome> {
    let mut step = base_step;
    let trials = if config.backtracking { MAX_HALVINGS + 1 } else { 1 };
    for _ in 0..trials {
        let mut trial = apply(state, step);
        trial.clamp_levels(&config.levels_box);
        let eval = evaluate_objective(&trial, data, prob, prior, config)?;
        if !config.backtracking || eval.total <= current_total {
            return Ok(UpdateOutcome { state: trial, eval, step });
        }
        step *= BACKTRACK_SHRINK;
    }
    Err(Error::StepCollapse)
}

/// Explicit update: `state += step * dir * L` with `step = 1/alpha`,
/// level values clamped to the box afterwards. With backtracking on, the
/// step is halved until the objective stops increasing; exhausting the
/// halvings signals [`Error::StepCollapse`]. When
/// [`InversionConfig::full_gradient`] is set, the penalty-gradient
/// completion of [`penalty_gradient_completion`] is added to the L-terms
/// before stepping.
#[allow(clippy::too_many_arguments)]
pub fn update_explicit(
    state: &LevelSetState,
    l_terms: &(ScalarField, ScalarField, ScalarField),
    current_total: f64,
    data: &BoundaryTrace,
    prob: &Problem,
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<UpdateOutcome> {
    let dir = if config.sign_flip { -1.0 } else { 1.0 };
    // the applied direction is dir * L, minus the penalty gradients when the
    // completion is on (those always enter descent-oriented)
    let mut terms = (
        l_terms.0.map(|v| dir * v),
        l_terms.1.map(|v| dir * v),
        l_terms.2.map(|v| dir * v),
    );
    if config.full_gradient {
        let (a_phi, a_psi1, a_psi2) = penalty_gradient_completion(state, prior, config)?;
        terms.0.scaled_add(-1.0, &a_phi);
        terms.1.scaled_add(-1.0, &a_psi1);
        terms.2.scaled_add(-1.0, &a_psi2);
    }
    let apply = |s: &LevelSetState, step: f64| {
        let mut trial = s.clone();
        trial.phi.scaled_add(step, &terms.0);
        trial.psi1.scaled_add(step, &terms.1);
        trial.psi2.scaled_add(step, &terms.2);
        trial
    };
    line_search(state, apply, 1.0 / config.alpha, current_total, data, prob, prior, config)
}

/// Gradients of the penalty addends that the printed update rule leaves
/// out, in the same `1/(2 beta)` scaling as the L-terms: the `H1` drift
/// pulls the level-set function with `alpha/beta2 * (d - Lap d)` and each
/// level function feels its own smoothed-TV curvature flow.
pub fn penalty_gradient_completion(
    state: &LevelSetState,
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let drift = state.phi.zip_map(&prior.phi0, |a, b| a - b)?;
    let lap = laplacian(&drift);
    let scale_phi = config.alpha / config.betas.beta2;
    let a_phi = drift.zip_map(&lap, |d, l| scale_phi * (d - l))?;

    let half_alpha = 0.5 * config.alpha;
    let d1 = state.psi1.zip_map(&prior.psi0_1, |a, b| a - b)?;
    let a_psi1 = curvature_div(&d1, config.beta_tv)?.map(|v| -half_alpha * v);
    let d2 = state.psi2.zip_map(&prior.psi0_2, |a, b| a - b)?;
    let a_psi2 = curvature_div(&d2, config.beta_tv)?.map(|v| -half_alpha * v);
    Ok((a_phi, a_psi1, a_psi2))
}

/// Smoothed update directions of the semi-implicit scheme: the level-set
/// increment solves the screened Poisson system
/// `alpha (Lap - I) dphi = -dir * L` with homogeneous Neumann boundary, and
/// each level increment solves one lagged-diffusivity step
/// `alpha div(grad dpsi / q) = -dir * L_j` with
/// `q = sqrt(|grad(psi_j - psi0_j)|^2 + beta_tv^2)` frozen at the iterate,
/// zero-mean pinned.
pub fn semi_implicit_deltas(
    state: &LevelSetState,
    l_terms: &(ScalarField, ScalarField, ScalarField),
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let dir = if config.sign_flip { 1.0 } else { -1.0 };
    let scale = -dir / config.alpha;
    let rhs_phi = l_terms.0.map(|v| scale * v);
    let dphi = solve_screened_neumann(&rhs_phi, config.solver)?;

    let mut deltas = Vec::with_capacity(2);
    for (psi, psi0, l) in [
        (&state.psi1, &prior.psi0_1, &l_terms.1),
        (&state.psi2, &prior.psi0_2, &l_terms.2),
    ] {
        let drift = psi.zip_map(psi0, |a, b| a - b)?;
        let grad = gradient(&drift);
        let mut q = ScalarField::zeros(psi.grid());
        for (k, qv) in q.values_mut().iter_mut().enumerate() {
            let m2 = grad.x[k] * grad.x[k] + grad.y[k] * grad.y[k];
            *qv = 1.0 / libm::sqrt(m2 + config.beta_tv * config.beta_tv);
        }
        let rhs = l.map(|v| scale * v);
        let dpsi = EllipticSystem::neumann(q, config.solver)?.solve_source(&rhs)?;
        deltas.push(dpsi);
    }
    let dpsi2 = deltas.pop().unwrap();
    let dpsi1 = deltas.pop().unwrap();
    Ok((dphi, dpsi1, dpsi2))
}

/// Semi-implicit update: smooth the L-terms through the solves of
/// [`semi_implicit_deltas`], then `state += (step/alpha) * delta` with
/// clamping and the same backtracking rule as the explicit scheme.
#[allow(clippy::too_many_arguments)]
pub fn update_semi_implicit(
    state: &LevelSetState,
    l_terms: &(ScalarField, ScalarField, ScalarField),
    current_total: f64,
    data: &BoundaryTrace,
    prob: &Problem,
    prior: &PriorData,
    config: &InversionConfig,
) -> Result<UpdateOutcome> {
    let (dphi, dpsi1, dpsi2) = semi_implicit_deltas(state, l_terms, prior, config)?;
    let apply = |s: &LevelSetState, step: f64| {
        let mut trial = s.clone();
        trial.phi.scaled_add(step, &dphi);
        trial.psi1.scaled_add(step, &dpsi1);
        trial.psi2.scaled_add(step, &dpsi2);
        trial
    };
    line_search(state, apply, 1.0 / config.alpha, current_total, data, prob, prior, config)
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    /// Residual norm reached `tau * delta`.
    Discrepancy,
    MaxIters,
    StepCollapse,
    /// A solver failure aborted the run; the report holds the partial history.
    Aborted,
}

/// Scalar diagnostics of one iterate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IterationRecord {
    pub iter: usize,
    pub misfit_sq: f64,
    pub residual_norm: f64,
    pub penalty_interface: f64,
    pub penalty_phi_h1: f64,
    pub penalty_levels: f64,
    pub total: f64,
    pub step: f64,
    pub eps: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub indicator_min: f64,
    pub indicator_max: f64,
    /// Relative L1 error of the represented coefficient against the ground
    /// truth, when a truth field is supplied.
    pub error_l1: Option<f64>,
}

/// Full history of a reconstruction run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Regularization weight actually used (after the alpha rule).
    pub alpha: f64,
    pub delta_abs: f64,
    pub final_state: LevelSetState,
    /// The failure behind an [`StopReason::Aborted`] stop.
    pub error: Option<Error>,
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("reports hold at least the initial record")
    }
}

fn relative_l1_error(u: &ScalarField, truth: &ScalarField) -> f64 {
    let diff = u.zip_map(truth, |a, b| a - b).expect("truth must share the grid");
    diff.norm(NormKind::L1) / truth.norm(NormKind::L1)
}

fn record_of(
    iter: usize,
    eval: &ObjectiveEval,
    step: f64,
    state: &LevelSetState,
    truth: Option<&ScalarField>,
) -> IterationRecord {
    let z = state.indicator();
    IterationRecord {
        iter,
        misfit_sq: eval.misfit_sq,
        residual_norm: eval.residual_norm,
        penalty_interface: eval.penalties.interface,
        penalty_phi_h1: eval.penalties.phi_h1,
        penalty_levels: eval.penalties.levels,
        total: eval.total,
        step,
        eps: state.eps,
        psi_min: state.psi1.min_value().min(state.psi2.min_value()),
        psi_max: state.psi1.max_value().max(state.psi2.max_value()),
        indicator_min: z.min_value(),
        indicator_max: z.max_value(),
        error_l1: truth.map(|t| relative_l1_error(&eval.coefficient, t)),
    }
}

/// Run the full iteration from the prior until the discrepancy principle
/// fires (`|residual| <= tau * delta_abs`, disabled for exact data), the
/// iteration budget is exhausted, or the line search collapses. Mid-run
/// solver failures stop the run with [`StopReason::Aborted`] and a partial
/// history.
pub fn run_inversion(
    prob: &Problem,
    data: &BoundaryTrace,
    delta_abs: f64,
    prior: &PriorData,
    config: &InversionConfig,
    truth: Option<&ScalarField>,
) -> Result<RunReport> {
    if data.grid() != prob.grid() || prior.phi0.grid() != prob.grid() {
        return Err(Error::GridMismatch);
    }
    if delta_abs < 0.0 {
        return Err(Error::InvalidParameter("delta_abs must be non-negative"));
    }
    let mut cfg = config.clone();
    cfg.alpha = config.resolved_alpha(delta_abs);
    cfg.validate()?;

    let mut state = prior.initial_state(cfg.eps0, &cfg.levels_box)?;
    let mut eval = evaluate_objective(&state, data, prob, prior, &cfg)?;
    let mut records = Vec::with_capacity(cfg.max_iters.min(1024) + 1);
    records.push(record_of(0, &eval, 0.0, &state, truth));

    let discrepancy_enabled = delta_abs > 0.0;
    let threshold = cfg.tau * delta_abs;
    let mut k = 0;
    let mut failure = None;

    let stop_reason = loop {
        if discrepancy_enabled && eval.residual_norm <= threshold {
            break StopReason::Discrepancy;
        }
        if k == cfg.max_iters {
            break StopReason::MaxIters;
        }
        let step_result = compute_l_terms(&state, &eval.residual, &eval.field, prob, &cfg)
            .and_then(|l| match cfg.scheme {
                UpdateScheme::Explicit => {
                    update_explicit(&state, &l, eval.total, data, prob, prior, &cfg)
                }
                UpdateScheme::SemiImplicit => {
                    update_semi_implicit(&state, &l, eval.total, data, prob, prior, &cfg)
                }
            });
        match step_result {
            Ok(outcome) => {
                state = outcome.state;
                eval = outcome.eval;
                k += 1;
                let mut dirty = false;
                if cfg.eps_decay != 1.0 {
                    state.eps *= cfg.eps_decay;
                    dirty = true;
                }
                if cfg.reinit_every > 0 && k % cfg.reinit_every == 0 {
                    state.phi = redistance(&state.phi);
                    dirty = true;
                }
                if dirty {
                    eval = evaluate_objective(&state, data, prob, prior, &cfg)?;
                }
                records.push(record_of(k, &eval, outcome.step, &state, truth));
            }
            Err(Error::StepCollapse) => break StopReason::StepCollapse,
            Err(e) => {
                failure = Some(e);
                break StopReason::Aborted;
            }
        }
    };

    Ok(RunReport {
        records,
        stop_reason,
        alpha: cfg.alpha,
        delta_abs,
        final_state: state,
        error: failure,
    })
}
