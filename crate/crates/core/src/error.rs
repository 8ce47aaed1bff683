use thiserror::Error;

use crate::estimate::StartTrace;
use crate::model::Violations;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter violations: {0}")]
    Invalid(Violations),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-stationary parameters: {0}")]
    NonStationary(String),

    #[error("series too short: need more than {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no start converged ({} starts attempted)", .0.len())]
    NotConverged(Vec<StartTrace>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("underdetermined: {0}")]
    Underdetermined(String),

    #[error("parameter on the search-box boundary: {0}")]
    OnBoundary(String),

    #[error("identification condition violated: {0}")]
    ConditionViolated(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse classification used by the experiment runner to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Refusal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid(_)
            | Error::InvalidInput(_)
            | Error::TooShort { .. }
            | Error::Underdetermined(_)
            | Error::Contract(_) => ErrorKind::Validation,
            Error::NotConverged(_)
            | Error::Quadrature(_)
            | Error::Numerical(_)
            | Error::Degenerate(_)
            | Error::Domain(_)
            | Error::OnBoundary(_) => ErrorKind::Numerical,
            Error::NonStationary(_) | Error::ConditionViolated(_) => ErrorKind::Refusal,
        }
    }
}

impl From<Violations> for Error {
    fn from(v: Violations) -> Self {
        Error::Invalid(v)
    }
}
