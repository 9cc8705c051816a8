use thiserror::Error;

/// Errors produced by the persistence bag-of-words pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    #[error("q-Wasserstein exponent must be >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("oracle size bound exceeded: {0} points (max {1})")]
    OracleTooLarge(usize, usize),

    #[error("requested {requested} clusters but only {available} (distinct) points")]
    TooFewPoints { requested: usize, available: usize },

    #[error("sampling pool is empty after excluding zero-weight points")]
    EmptyPool,

    #[error("covariance matrix is singular or not positive-definite")]
    SingularCovariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("classifier needs at least two classes")]
    SingleClass,

    #[error("empty evaluation set")]
    EmptyTestSet,

    #[error("k = {k} exceeds training set size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
