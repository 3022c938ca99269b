use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts; last failure: {last}")]
    RetriesExhausted {
        attempts: usize,
        /// Status of the last response, if one arrived.
        status: Option<u16>,
        last: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("logprobs unavailable")]
    LogprobsUnavailable,
    #[error("scoring unsupported: token {token:?} not among the returned alternatives")]
    ScoringUnsupported { token: String },
    #[error("empty generation after {attempts} attempts")]
    EmptyGeneration { attempts: usize },
    #[error("unparseable generation after {attempts} attempts")]
    UnparseableGeneration { attempts: usize },
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl LlmError {
    /// HTTP status carried by the error, if any.
    pub fn status(&self) -> Option<u16> {
        match self {
            LlmError::Auth { status } | LlmError::Http { status, .. } => Some(*status),
            LlmError::RetriesExhausted { status, .. } => *status,
            _ => None,
        }
    }
}
