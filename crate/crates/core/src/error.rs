use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `round` is zero-based; the message reports it one-based like the trace files.
    #[error("non-finite {what} at round {}", .round + 1)]
    NonFinite { round: usize, what: &'static str },

    #[error("contraction audit failed: {0}")]
    ContractionViolated(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors caused by bad caller input rather than a failure mid-run.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::NonFinite { .. } | Error::ContractionViolated(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
