use thiserror::Error;

/// Errors produced by the library.
///
/// `Contract` and `Domain` indicate misuse (bad shapes, out-of-domain
/// arguments); `Fit`, `Estimation` and `Numerical` indicate that a
/// computation could not produce a meaningful result for the given data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
