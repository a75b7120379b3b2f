use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative value {value} at node {index} where a nonnegative field is required")]
    NegativeValue { index: usize, value: f64 },

    #[error("mobility evaluated at negative argument {value} (node {index})")]
    MobilityDomain { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "singular matrix: zero pivot at row {row} (pivot magnitude {pivot:e}, max entry {scale:e})"
    )]
    Singular { row: usize, pivot: f64, scale: f64 },

    #[error("solver did not reach tolerance {tol:e}: residual {residual:e} after {iterations} iterations ({method})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("matrix size {n} exceeds diagnostic cap {cap}")]
    SizeCapExceeded { n: usize, cap: usize },

    #[error("run diverged at step {step} (t = {t})")]
    Diverged {
        step: usize,
        t: f64,
        trace: Box<crate::stepper::RunTrace>,
    },

    #[error("snapshot times must be strictly increasing (got {prev} then {next})")]
    NonMonotoneTimes { prev: f64, next: f64 },

    #[error("study failed at resolution {resolution}: {source}")]
    StudyFailed {
        resolution: usize,
        source: Box<Error>,
        completed: Vec<crate::harness::ConvergenceRow>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code used by the command-line front end for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::InvalidGrid(_) => 2,
            Error::StudyFailed { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
