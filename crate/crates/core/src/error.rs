use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index out of range: {what} = {index} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("retry budget exhausted: {0}")]
    RetriesExhausted(String),

    #[error("policy is not defined on every observation: {0}")]
    PartialPolicy(String),

    #[error("trajectory too short: need at least {need} steps, got {got}")]
    TrajectoryTooShort { need: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("requested rank {requested} exceeds numerical rank {available}")]
    RankExceeded { requested: usize, available: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate moments: {0}")]
    Degenerate(String),

    #[error("markov chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("action {0} is never taken under the policy")]
    ActionNeverTaken(usize),

    #[error("state {target} is unreachable from state {source_state}")]
    Unreachable { source_state: usize, target: usize },

    #[error("inconsistent label history: {0}")]
    LabelHistory(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing input: {0}")]
    Missing(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
