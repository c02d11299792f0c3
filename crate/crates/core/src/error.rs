use thiserror::Error;

/// Errors raised by builders, certifiers and file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("depth mismatch: networks have depths {depths:?}")]
    DepthMismatch { depths: Vec<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("codebook contract violated: {0}")]
    Contract(String),

    #[error("zero weight: {0}")]
    ZeroWeight(String),

    #[error("total masses differ: {source_total} vs {target_total}")]
    MassMismatch { source_total: f64, target_total: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}
