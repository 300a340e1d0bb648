//! Error type shared by all modules.

use core::fmt;

/// Everything that can go wrong inside the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid must have at least 3 nodes per axis and positive spacings.
    GridTooSmall { nx: usize, ny: usize },
    /// Two fields (or a field and a trace) live on different grids.
    GridMismatch,
    /// A field value is NaN or infinite where a finite value is required.
    NonFiniteValue,
    /// A scalar parameter is outside its admissible range.
    InvalidParameter(&'static str),
    /// Admissible box needs `m < M`.
    InvalidBox { m: f64, max: f64 },
    /// The indicator argument of the level projector left `[0, 1]`.
    IndicatorOutOfRange { worst: f64 },
    /// Elliptic coefficient must be strictly positive.
    NonPositiveCoefficient { min: f64 },
    /// A coefficient or level value violates the admissible box.
    BoxViolation { value: f64 },
    /// Iterative linear solver ran out of iterations.
    SolverDidNotConverge { iters: usize, residual: f64 },
    /// Cholesky factorization hit a non-positive pivot.
    FactorizationFailed { row: usize },
    /// Noisy trace cannot be scaled relative to a zero-norm signal.
    ZeroNormData,
    /// Line search exhausted its halvings without an objective decrease.
    StepCollapse,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridTooSmall { nx, ny } => {
                write!(f, "grid too small: {nx}x{ny}, need at least 3 nodes per axis")
            }
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::NonFiniteValue => write!(f, "non-finite value encountered"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::InvalidBox { m, max } => {
                write!(f, "admissible box requires m < M, got [{m}, {max}]")
            }
            Error::IndicatorOutOfRange { worst } => {
                write!(f, "indicator value {worst} outside [0, 1]")
            }
            Error::NonPositiveCoefficient { min } => {
                write!(f, "elliptic coefficient must be positive, min is {min}")
            }
            Error::BoxViolation { value } => {
                write!(f, "value {value} violates the admissible box")
            }
            Error::SolverDidNotConverge { iters, residual } => {
                write!(f, "linear solver stalled after {iters} iterations, residual {residual:e}")
            }
            Error::FactorizationFailed { row } => {
                write!(f, "Cholesky factorization failed at row {row}")
            }
            Error::ZeroNormData => write!(f, "cannot scale noise relative to zero-norm data"),
            Error::StepCollapse => write!(f, "line search collapsed without descent"),
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
