use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no actions available at a terminal state")]
    NoActions,

    #[error("invalid action {index} for {kind} slot with {available} choices")]
    InvalidAction {
        index: usize,
        kind: &'static str,
        available: usize,
    },

    #[error("enumeration of {count} terminals exceeds cap {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("forward cache does not match network ({0})")]
    StaleCache(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),

    #[error("non-finite flows at state {state:?}: {flows:?}")]
    NonFiniteFlow { state: Vec<usize>, flows: Vec<f64> },

    #[error("incomplete trajectory: {0}")]
    IncompleteTrajectory(String),

    #[error("evaluator rejected: {0}")]
    NonDeterministicEvaluator(String),

    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),

    #[error("{skipped} of {iterations} iterations skipped after evaluator failures; last error: {last}")]
    TooManyFailures {
        skipped: usize,
        iterations: usize,
        last: String,
    },

    #[error("run log holds no evaluated trajectories")]
    EmptyLog,

    #[error("total flow Z is zero")]
    ZeroPartition,

    #[error("distributions have different supports")]
    MismatchedSupport,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid training config: {0}")]
    TrainConfig(String),

    #[error("corrupt checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures raised by reward sources.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvaluatorError {
    #[error("unknown architecture {0}")]
    UnknownArchitecture(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("evaluator timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },

    #[error("protocol error: {message} (payload: {raw:?})")]
    Protocol { message: String, raw: String },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("evaluator reported error: {0}")]
    Remote(String),

    #[error("evaluator unavailable: {0}")]
    Unavailable(String),
}
