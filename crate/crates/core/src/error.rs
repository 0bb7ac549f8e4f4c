use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lambda = {lambda} is outside the domain (lambda must exceed 1 - epsilon = {floor})")]
    OutOfDomain { lambda: f64, floor: f64 },

    #[error("no dominant eigenvalue: {0}")]
    NoEigenvalue(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("numerical failure at t = {t}: {msg}")]
    NumericalFailure { t: f64, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(t: f64, msg: impl Into<String>) -> Self {
        Error::NumericalFailure { t, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
