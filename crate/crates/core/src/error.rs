use thiserror::Error;

/// Errors raised by the simulator and the learners.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent table shapes or malformed structures.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A structural contract was broken (double drain, empty input, infeasible set).
    #[error("structural error: {0}")]
    Structural(String),
    /// Invalid parameters or configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// NaN, infinity or another numerical blow-up.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A stated precondition of an audit or update did not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A simulator budget was exhausted.
    #[error("resource exhausted: {0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
