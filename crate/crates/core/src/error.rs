use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("channel matrix contains non-finite entries")]
    NonFinite,

    #[error("effective rank is undefined for an all-zero matrix")]
    ZeroMatrix,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("duplicate candidate index {index} in selection")]
    DuplicateIndex { index: usize },

    #[error("candidate index {index} out of range (I_pos = {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("cannot select {k} distinct positions out of {available}")]
    SelectionTooLarge { k: usize, available: usize },

    #[error("zero distance between transmitter and receiver")]
    ZeroDistance,

    #[error("exhaustive enumeration needs {count} evaluations, cap is {cap}")]
    BudgetExceeded { count: u128, cap: u128 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
