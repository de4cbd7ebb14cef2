use thiserror::Error;

use crate::game::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state index {index} out of range for {count} states")]
    UnknownState { index: usize, count: usize },

    #[error("invalid game: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidGame(Vec<Violation>),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix game solver failed: {0}")]
    MatrixGame(String),

    #[error("joint observation space of size {size} exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: usize },

    #[error("invalid sensor bank: {0}")]
    InvalidSensorBank(String),

    #[error("cannot choose {k} sensors out of {n}")]
    TooManySensors { k: usize, n: usize },

    #[error("support set is empty")]
    EmptySupport,

    #[error("exact evaluation exceeded the node cap of {cap}")]
    NodeCap { cap: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("prediction step produced an all-zero belief")]
    DegenerateBelief,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
