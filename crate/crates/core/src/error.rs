use thiserror::Error;

/// Errors surfaced by the simulation and solver modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// The implicit spring equation has no root in [0, 1).
    #[error("unsolvable step: a = {a}, c = {c}")]
    UnsolvableStep { a: f64, c: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::DomainViolation(msg.into())
}
