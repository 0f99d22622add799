use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution at {key}: {reason}")]
    InvalidPmf { key: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("sample budget too small: {0}")]
    Budget(String),

    /// Configuration refused by a desk-scale guard; carries the work estimate.
    #[error("refused: estimated work {work:.3e} exceeds bound {bound:.3e} = 2^{} ({hint})", .bound.log2())]
    TooLarge { work: f64, bound: f64, hint: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn pmf(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidPmf {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
