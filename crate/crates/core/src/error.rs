use thiserror::Error;

/// Errors surfaced by the consensus, puzzle and simulation layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid key material: {0}")]
    InvalidKey(String),
    #[error("invalid pass probability: {0}")]
    InvalidPassProbability(String),
    #[error("invalid code parameters: {0}")]
    InvalidCodeParams(String),
    #[error("dimension mismatch: expected {expected} bits, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown difficulty level {0}")]
    UnknownLevel(u32),
    #[error("total stake must be positive")]
    ZeroTotalStake,
    #[error("stake {stake} exceeds total stake {total}")]
    StakeExceedsTotal { stake: u64, total: u64 },
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("measurement failed: {0}")]
    Measurement(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
