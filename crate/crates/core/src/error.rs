use thiserror::Error;

use crate::trajectories::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {what} expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid grid field `{field}`: {reason}")]
    InvalidGrid { field: &'static str, reason: String },

    #[error("invalid physical parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("degenerate state: modulus below floor across the whole domain")]
    DegenerateState,

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("incomplete history: missing {0}")]
    IncompleteHistory(&'static str),

    #[error("numerical divergence: non-finite values at iteration {iteration}")]
    NumericalDivergence { iteration: usize },

    #[error("tridiagonal solve failed at step {step}: zero pivot")]
    TridiagonalFailure { step: usize },

    #[error("envelope width reached {sigma} at t = {t}; reduce the time step")]
    StepSize { t: f64, sigma: f64 },

    #[error("trajectory left the spatial domain at t = {t}")]
    OutOfDomain { t: f64, partial: Box<Trajectory> },

    #[error("domain too narrow: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dimension(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            found,
        }
    }
}
