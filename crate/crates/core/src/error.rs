use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("not a probability vector: {0}")]
    NotNormalized(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration of {states} states exceeds the cap of {cap}")]
    Infeasible { states: u128, cap: u128 },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("solver did not converge: {message}")]
    NoConvergence { message: String, trace: Vec<String> },
}

pub type Result<T> = std::result::Result<T, Error>;
