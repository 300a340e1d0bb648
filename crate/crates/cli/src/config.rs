//! TOML run configuration: parsing, validation and conversion into the
//! library types.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lsr_core::elliptic::{SolveMethod, SolverSettings};
use lsr_core::grid::{BoundaryTrace, Grid2D, ScalarField};
use lsr_core::inversion::{AlphaRule, InversionConfig, PriorData, UpdateScheme};
use lsr_core::levelset::{AdmissibleBox, Betas};
use lsr_core::operators::{AdjointMode, ConductivityProblem, PotentialProblem, Problem};

use crate::phantom::{LevelLaw, PhantomShape, PhantomSpec};
use crate::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    #[serde(default)]
    pub problem: ProblemSection,
    pub phantom: PhantomSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub reg: RegSection,
    #[serde(default)]
    pub update: UpdateSection,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub init: InitSection,
    pub out: OutSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// `potential` or `conductivity`.
    #[serde(default = "default_kind")]
    pub kind: String,
    /// `discrete` or `paper` adjoint route.
    #[serde(default = "default_adjoint")]
    pub adjoint: String,
    /// Measure the literal Dirichlet trace in the conductivity problem.
    #[serde(default)]
    pub f2_literal_trace: bool,
}

fn default_kind() -> String {
    "potential".into()
}

fn default_adjoint() -> String {
    "discrete".into()
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { kind: default_kind(), adjoint: default_adjoint(), f2_literal_trace: false }
    }
}

// no deny_unknown_fields here: the flattened shape enum absorbs its keys
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSection {
    #[serde(flatten)]
    pub shape: ShapeConfig,
    pub psi1: LawConfig,
    pub psi2: LawConfig,
    /// Admissible box bounds.
    pub m: f64,
    #[serde(rename = "M")]
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeConfig {
    Disk { center: [f64; 2], radius: f64 },
    TwoDisks { centers: [[f64; 2]; 2], radii: [f64; 2] },
    Square { center: [f64; 2], half_side: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Constant { value: f64 },
    RampX { a: f64, b: f64 },
    RampY { a: f64, b: f64 },
    Radial { a: f64, b: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub delta_rel: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { delta_rel: 0.0, seed: default_seed() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub alpha_rule: Option<AlphaRuleSection>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_beta3")]
    pub beta3: f64,
    /// Heaviside band width; 0 resolves to `2 * max(hx, hy)`.
    #[serde(default)]
    pub eps0: f64,
    #[serde(default = "default_eps_decay")]
    pub eps_decay: f64,
    #[serde(default = "default_beta_tv")]
    pub beta_tv: f64,
}

fn default_alpha() -> f64 {
    3e-4
}
fn default_beta1() -> f64 {
    1e-4
}
fn default_beta2() -> f64 {
    0.2
}
fn default_beta3() -> f64 {
    1.0
}
fn default_eps_decay() -> f64 {
    1.0
}
fn default_beta_tv() -> f64 {
    1e-6
}

impl Default for RegSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            alpha_rule: None,
            beta1: default_beta1(),
            beta2: default_beta2(),
            beta3: default_beta3(),
            eps0: 0.0,
            eps_decay: default_eps_decay(),
            beta_tv: default_beta_tv(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRuleSection {
    pub c: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSection {
    /// `explicit` or `semi_implicit`.
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_true")]
    pub sign_flip: bool,
    #[serde(default = "default_true")]
    pub backtracking: bool,
    #[serde(default = "default_true")]
    pub full_gradient: bool,
    #[serde(default)]
    pub reinit_every: usize,
}

fn default_scheme() -> String {
    "explicit".into()
}

fn default_true() -> bool {
    true
}

impl Default for UpdateSection {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            sign_flip: true,
            backtracking: true,
            full_gradient: true,
            reinit_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tau() -> f64 {
    1.5
}
fn default_max_iters() -> usize {
    500
}

impl Default for StopSection {
    fn default() -> Self {
        Self { tau: default_tau(), max_iters: default_max_iters() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// `cg` or `direct`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_solver_iters")]
    pub max_iters: usize,
}

fn default_method() -> String {
    "cg".into()
}
fn default_rel_tol() -> f64 {
    1e-10
}
fn default_solver_iters() -> usize {
    20_000
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { method: default_method(), rel_tol: default_rel_tol(), max_iters: default_solver_iters() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// Radius of the centered-disk level-set prior.
    #[serde(default = "default_phi_radius")]
    pub phi_radius: f64,
}

fn default_phi_radius() -> f64 {
    0.25
}

impl Default for InitSection {
    fn default() -> Self {
        Self { phi_radius: default_phi_radius() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutSection {
    pub dir: String,
}

impl Config {
    /// Parse and validate a TOML config file; parse errors carry the
    /// offending line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, what: &str| -> CliError {
            CliError::Config(format!("{key}: {what}"))
        };
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(bad("grid.nx/grid.ny", "need at least 3 nodes per axis"));
        }
        match self.problem.kind.as_str() {
            "potential" | "conductivity" => {}
            other => return Err(bad("problem.kind", &format!("unknown kind `{other}`"))),
        }
        match self.problem.adjoint.as_str() {
            "discrete" | "paper" => {}
            other => return Err(bad("problem.adjoint", &format!("unknown mode `{other}`"))),
        }
        if !(self.phantom.m < self.phantom.upper) {
            return Err(bad("phantom.m/phantom.M", "need m < M"));
        }
        if self.problem.kind == "conductivity" && !(self.phantom.m > 0.0) {
            return Err(bad("phantom.m", "conductivity problems need m > 0"));
        }
        if self.noise.delta_rel < 0.0 {
            return Err(bad("noise.delta_rel", "must be non-negative"));
        }
        match self.update.scheme.as_str() {
            "explicit" | "semi_implicit" => {}
            other => return Err(bad("update.scheme", &format!("unknown scheme `{other}`"))),
        }
        match self.solver.method.as_str() {
            "cg" | "direct" => {}
            other => return Err(bad("solver.method", &format!("unknown method `{other}`"))),
        }
        if !(self.init.phi_radius > 0.0) {
            return Err(bad("init.phi_radius", "must be positive"));
        }
        // the numeric regularization/stopping invariants live in the library
        let grid = self.grid()?;
        self.inversion_config(grid)?.validate().map_err(|e| bad("reg/update/stop", &e.to_string()))?;
        self.phantom_spec()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Ok(Grid2D::unit_square(self.grid.nx, self.grid.ny)?)
    }

    pub fn levels_box(&self) -> Result<AdmissibleBox> {
        Ok(AdmissibleBox::new(self.phantom.m, self.phantom.upper)?)
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        let shape = match &self.phantom.shape {
            ShapeConfig::Disk { center, radius } => {
                PhantomShape::Disk { center: (center[0], center[1]), radius: *radius }
            }
            ShapeConfig::TwoDisks { centers, radii } => PhantomShape::TwoDisks {
                centers: [(centers[0][0], centers[0][1]), (centers[1][0], centers[1][1])],
                radii: *radii,
            },
            ShapeConfig::Square { center, half_side } => {
                PhantomShape::Square { center: (center[0], center[1]), half_side: *half_side }
            }
        };
        let law = |cfg: &LawConfig| match cfg {
            LawConfig::Constant { value } => LevelLaw::Constant(*value),
            LawConfig::RampX { a, b } => LevelLaw::RampX(*a, *b),
            LawConfig::RampY { a, b } => LevelLaw::RampY(*a, *b),
            LawConfig::Radial { a, b } => LevelLaw::Radial(*a, *b),
        };
        let spec = PhantomSpec {
            shape,
            psi1: law(&self.phantom.psi1),
            psi2: law(&self.phantom.psi2),
            bounds: self.levels_box()?,
        };
        spec.validate(self.grid()?).map_err(CliError::Config)?;
        Ok(spec)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            method: if self.solver.method == "direct" {
                SolveMethod::Direct
            } else {
                SolveMethod::ConjugateGradient
            },
            rel_tol: self.solver.rel_tol,
            max_iters: self.solver.max_iters,
        }
    }

    /// Resolved band width: explicit `reg.eps0` or the grid default.
    pub fn eps0(&self, grid: Grid2D) -> f64 {
        if self.reg.eps0 > 0.0 {
            self.reg.eps0
        } else {
            2.0 * grid.hx().max(grid.hy())
        }
    }

    pub fn inversion_config(&self, grid: Grid2D) -> Result<InversionConfig> {
        let mut cfg = InversionConfig::new(self.levels_box()?, self.eps0(grid));
        cfg.alpha = self.reg.alpha;
        cfg.alpha_rule = self.reg.alpha_rule.map(|r| AlphaRule { c: r.c, p: r.p });
        cfg.betas = Betas { beta1: self.reg.beta1, beta2: self.reg.beta2, beta3: self.reg.beta3 };
        cfg.eps_decay = self.reg.eps_decay;
        cfg.beta_tv = self.reg.beta_tv;
        cfg.scheme = if self.update.scheme == "semi_implicit" {
            UpdateScheme::SemiImplicit
        } else {
            UpdateScheme::Explicit
        };
        cfg.sign_flip = self.update.sign_flip;
        cfg.backtracking = self.update.backtracking;
        cfg.full_gradient = self.update.full_gradient;
        cfg.reinit_every = self.update.reinit_every;
        cfg.tau = self.stop.tau;
        cfg.max_iters = self.stop.max_iters;
        cfg.adjoint_mode = if self.problem.adjoint == "paper" {
            AdjointMode::Paper
        } else {
            AdjointMode::Discrete
        };
        cfg.solver = self.solver_settings();
        Ok(cfg)
    }

    /// Build the forward problem. The potential problem uses unit
    /// conductivity with homogeneous Dirichlet data; the conductivity
    /// problem uses a zero source with the linear voltage profile `g = x`.
    pub fn build_problem(&self, grid: Grid2D) -> Result<Problem> {
        let settings = self.solver_settings();
        match self.problem.kind.as_str() {
            "potential" => Ok(Problem::Potential(PotentialProblem::new(
                ScalarField::constant(grid, 1.0),
                BoundaryTrace::zeros(grid),
                settings,
            )?)),
            _ => {
                let mut prob = ConductivityProblem::new(
                    ScalarField::zeros(grid),
                    BoundaryTrace::from_fn(grid, |x, _| x),
                    self.levels_box()?,
                    settings,
                )?;
                prob.literal_trace = self.problem.f2_literal_trace;
                Ok(Problem::Conductivity(prob))
            }
        }
    }

    /// Prior data: signed distance to a centered disk for the level-set
    /// function, mid-box constants for the levels.
    pub fn prior(&self, grid: Grid2D) -> Result<PriorData> {
        let bounds = self.levels_box()?;
        if (self.init.phi_radius - 0.25).abs() < 1e-15 {
            return Ok(PriorData::centered_disk(grid, bounds));
        }
        let r = self.init.phi_radius;
        let cx = 0.5 * (grid.x(0) + grid.x(grid.nx() - 1));
        let cy = 0.5 * (grid.y(0) + grid.y(grid.ny() - 1));
        let phi0 = ScalarField::from_fn(grid, |x, y| r - (x - cx).hypot(y - cy));
        let mid = ScalarField::constant(grid, bounds.midpoint());
        Ok(PriorData::new(phi0, mid.clone(), mid)?)
    }
}
