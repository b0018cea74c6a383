use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("leg '{0}' not found on tensor")]
    LegNotFound(String),

    #[error("repeated leg label '{0}' within one tensor")]
    DuplicateLeg(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("data length {got} does not match shape product {expected}")]
    DataLength { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("norm collapse: pre-normalization log-norm {0:.3e} is below the cutoff")]
    NormCollapse(f64),

    #[error("infeasible filter parameters: {0}")]
    InfeasibleParams(String),

    #[error("target accuracy unreachable under the truncation policy; best achieved bound {best:.3e}")]
    EpsilonUnreachable { best: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("config error in field '{field}': {message}")]
    Config { field: String, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
