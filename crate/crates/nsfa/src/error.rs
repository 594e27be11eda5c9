//! Error type shared across the crate.

/// Errors reported by model construction, sampling, and file parsing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Matrix dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Internal state violates a structural invariant.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Rejected configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
