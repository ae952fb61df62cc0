use thiserror::Error;

/// Errors raised by the replay library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("slot index {index} out of range for capacity {capacity}")]
    IndexOutOfRange { index: usize, capacity: usize },
    #[error("leaf value must be finite and non-negative, got {0}")]
    InvalidLeafValue(f64),
    #[error("prefix position {x} outside [0, {total})")]
    PrefixOutOfRange { x: f64, total: f64 },
    #[error("tree holds no positive mass")]
    EmptyTree,
    #[error("age must be non-negative and finite, got {0}")]
    NegativeAge(f64),
    #[error("priority signal is missing the {0} field")]
    MissingSignal(&'static str),
    #[error("priority signal is not finite: {0}")]
    NonFiniteSignal(f64),
    #[error("base priority must be positive, got {0}")]
    NonPositiveBase(f64),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("unknown trajectory id {0}")]
    UnknownTrajectory(u64),
    #[error("base priority frozen in reward mode")]
    FrozenBase,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("target has mass at index {0} where behavior has none")]
    SupportViolation(usize),
    #[error("{what} index {index} out of range (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("weights must be non-empty, positive and finite")]
    InvalidWeights,
    #[error("episode already finished; call reset")]
    EpisodeDone,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
