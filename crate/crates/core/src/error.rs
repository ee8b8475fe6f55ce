use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum LpError {
    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point set is empty")]
    Empty,

    #[error("duplicate points (first id, duplicate id): {pairs:?}")]
    Duplicates { pairs: Vec<(usize, usize)> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vector outside the {bound} ball (norm {norm})")]
    OutsideBall { norm: f64, bound: f64 },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LpError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> LpError {
    LpError::InvalidParameter(msg.into())
}
