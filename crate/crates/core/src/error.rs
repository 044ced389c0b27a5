use thiserror::Error;

/// Errors raised by the solvers and estimators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("CFL violation: dt = {dt:e} exceeds {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("quadrature did not converge after {levels} halvings (last estimate {estimate:e})")]
    QuadratureFailure { levels: u32, estimate: f64 },

    #[error("obstacle is positive at t = 0 (node {node}, value {value:e})")]
    ObstacleInitialPositive { node: usize, value: f64 },

    #[error("state already blown up at t = {0}")]
    AlreadyBlownUp(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch between profiles")]
    GridMismatch,

    #[error("advection CFL violated at step {step}: dt*|c| = {courant:e} > dx")]
    AdvectionCfl { step: usize, courant: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate series: all increments vanish")]
    Degenerate,

    #[error("format error: {0}")]
    Format(String),

    #[error("event times not monotone at row {row}: {prev} > {next}")]
    NonMonotoneTime { row: usize, prev: f64, next: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the numerics rather than by invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure { .. }
                | Error::AdvectionCfl { .. }
                | Error::AlreadyBlownUp(_)
                | Error::Degenerate
                | Error::NonFinite(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
