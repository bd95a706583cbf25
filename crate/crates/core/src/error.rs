use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("objective is unbounded below (bracket grew past {bracket:e})")]
    UnboundedBelow { bracket: f64 },

    #[error("concavity violation: second difference {q:e} exceeds tolerance")]
    ConcavityViolation { q: f64 },

    #[error(
        "policy iteration did not converge at time index {time_index} after {rounds} rounds (residual {residual:e})"
    )]
    NonConvergence {
        time_index: usize,
        rounds: usize,
        residual: f64,
    },

    #[error("singular tridiagonal system at row {row}")]
    Singular { row: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
