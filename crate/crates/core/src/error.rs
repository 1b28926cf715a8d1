use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("edge endpoint `{0}` is not present in the node table")]
    DanglingEndpoint(String),

    #[error("line {line}: cannot parse `{value}` as a number")]
    ParseNumber { line: usize, value: String },

    #[error("malformed input at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid privacy configuration: {0}")]
    PrivacyConfig(String),

    #[error("aggregation aborted: {0}")]
    AggregationAborted(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("transport closed: {0}")]
    Disconnected(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid run transition from {from} to {to}")]
    InvalidTransition { from: String, to: String },

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
