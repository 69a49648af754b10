use thiserror::Error;

/// Errors raised by distribution construction, samplers, testers, and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty histogram: total count is zero")]
    EmptyHistogram,

    #[error("mismatched supports: {0} vs {1}")]
    MismatchedSupport(usize, usize),

    #[error("sample stream exhausted after {0} symbols")]
    StreamExhausted(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
