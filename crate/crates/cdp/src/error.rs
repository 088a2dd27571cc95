use thiserror::Error;
use webnav::skills::SessionError;

use crate::instrumentation::InstrumentationError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CdpError {
    #[error("cannot connect to {endpoint}: {reason}")]
    ConnectFailed { endpoint: String, reason: String },
    #[error("endpoint speaks protocol {found}, expected {expected}")]
    ProtocolVersionMismatch { expected: String, found: String },
    #[error("{method} failed ({code}): {message}")]
    Command {
        method: String,
        code: i64,
        message: String,
    },
    #[error("malformed protocol message: {0}")]
    Malformed(String),
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("connection closed")]
    Closed,
    #[error("invalid adapter config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Instrumentation(#[from] InstrumentationError),
}

impl From<CdpError> for SessionError {
    fn from(e: CdpError) -> Self {
        match e {
            CdpError::Timeout(ms) => SessionError::Timeout(ms),
            CdpError::Closed => SessionError::Closed,
            CdpError::Instrumentation(i) => SessionError::EvaluationFailed {
                retryable: matches!(i, InstrumentationError::EpochMismatch { .. }),
                message: i.to_string(),
            },
            other => SessionError::Protocol(other.to_string()),
        }
    }
}
