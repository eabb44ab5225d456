use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by estimation and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (wrong shape, too few observations, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An estimator could not produce a usable result.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A numerical routine failed to converge or produced an ill-defined result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A category contains no observations or negligible probability mass.
    #[error("empty category {index}: {detail}")]
    EmptyCategory { index: usize, detail: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
