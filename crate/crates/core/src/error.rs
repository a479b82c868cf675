use thiserror::Error;

/// Errors surfaced by the library. The CLI maps `Usage` to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
