use thiserror::Error;

/// Best candidate at the moment a sample cap was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEstimate {
    pub members: Vec<String>,
    pub stability: f64,
    pub confidence_error: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("region of interest is empty or degenerate: {0}")]
    EmptyRegion(String),

    #[error("no acceptable sample after {trials} trials; region of interest is degenerate")]
    SamplerExhausted { trials: u64 },

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("sample cap of {samples} reached before the confidence error target")]
    BudgetExceeded { samples: u64, total_samples: u64, candidate: Option<PartialEstimate> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
