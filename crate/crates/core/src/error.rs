use thiserror::Error;

/// Errors produced by the solvers, data containers and model I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {what} of length {len}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid sparse structure: {0}")]
    InvalidSparse(String),

    #[error("invalid penalty specification: {0}")]
    InvalidPenalty(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("response value {value} at row {row} is outside the domain of family {family}")]
    InvalidResponse {
        family: String,
        row: usize,
        value: f64,
    },

    #[error("invalid lambda specification: {0}")]
    InvalidLambda(String),

    #[error("lambda_max is undefined: {0}")]
    UndefinedLambdaMax(String),

    #[error("invalid survival data: {0}")]
    InvalidSurvival(String),

    #[error("no failures in survival response")]
    NoFailures,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cross-validation failed: {0}")]
    CrossValidation(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
