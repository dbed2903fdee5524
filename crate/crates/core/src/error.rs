use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("nonpositive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("leading coefficient is zero")]
    ZeroLeadingCoefficient,

    #[error("square root breakdown at ({row}, {col}): divisor {divisor:e}")]
    SqrtBreakdown {
        row: usize,
        col: usize,
        divisor: f64,
    },

    #[error("bandwidth {p} out of range 1..={n}")]
    BandwidthOutOfRange { p: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative entry {value} at ({row}, {col}); multi-participation sensitivity needs a nonnegative matrix")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("exact pattern enumeration is limited to n <= {max}, got n = {n}")]
    ExactEnumerationTooLarge { n: usize, max: usize },

    #[error("noise stream exhausted after {0} steps")]
    StreamExhausted(usize),

    #[error("participation index {index} exceeds n = {n}")]
    SchemaOutOfRange { index: usize, n: usize },

    #[error("factorization residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
