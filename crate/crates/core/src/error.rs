use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("population state is invalid: {0}")]
    InvalidState(String),

    #[error("pool index {index} out of range for {pools} pools")]
    PoolIndex { index: usize, pools: usize },

    #[error("degenerate state: the weighted hash rate sum is zero")]
    DegenerateState,

    #[error("payoff of pool {pool} is undefined while the pool is empty")]
    EmptyPool { pool: usize },

    #[error("operation requires {expected} pools, got {got}")]
    UnsupportedShape { expected: usize, got: usize },

    #[error("strategies are degenerate: {0}")]
    DegenerateStrategies(String),

    #[error("state is not a rest point: replicator residual {residual:e}")]
    NotRestPoint { residual: f64 },

    #[error("numerical failure at t = {time}")]
    NumericalFailure { time: f64 },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
