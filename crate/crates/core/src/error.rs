use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A proven inequality failed numerically. Indicates a bug, not bad input.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("token quantum state already consumed by a measurement")]
    TokenConsumed,

    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
