use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model:\n{0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("observation has zero probability under the current belief")]
    ImpossibleObservation,

    #[error("human action has zero probability under the current internal-state belief")]
    ImpossibleHumanAction,

    #[error("history has zero probability")]
    HistoryImpossible,

    #[error("horizon {horizon} exceeds the enumeration limit {limit}")]
    HorizonTooLarge { horizon: usize, limit: usize },

    #[error("stage {stage} out of range for horizon {horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("alpha-vector set grew to {size} (cap {cap}) at stage {stage}")]
    VectorSetExplosion { size: usize, cap: usize, stage: usize },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
