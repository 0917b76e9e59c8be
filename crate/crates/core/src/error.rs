use thiserror::Error;

/// Errors raised by the solvers and reconstruction routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside the supported domain: {0}")]
    Domain(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate reference: no mode in the window has a usable reference coefficient")]
    DegenerateReference,

    #[error("inconsistent data: ratio limit {0:e} does not determine a terminal time")]
    InconsistentData(f64),

    #[error("insufficient history: need at least {needed} time levels, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("positivity violated: u(T) = {value:e} at node {node} is below the floor {floor:e}")]
    Positivity { node: usize, value: f64, floor: f64 },

    #[error("inadmissible parameter: {0}")]
    Admissibility(String),

    #[error("iteration diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
