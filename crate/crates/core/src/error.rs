use thiserror::Error;

/// Errors produced by the pricing core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("index out of range: {what} = {index} (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("price vector has length {got}, expected {expected}")]
    PriceLength { got: usize, expected: usize },

    #[error("price vector is infeasible: {0}")]
    InfeasiblePrice(String),

    #[error("instance is infeasible: the price box does not meet the linear constraints")]
    InfeasibleInstance,

    #[error("LP solver numerical failure: {0}")]
    NumericalFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
