use thiserror::Error;

/// Errors raised by precondition violations across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two inputs that must agree in length did not.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn length(msg: impl Into<String>) -> Self {
        Error::LengthMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
