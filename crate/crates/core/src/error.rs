use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid action {action} for agent {agent} (space size {size})")]
    InvalidAction {
        agent: usize,
        action: usize,
        size: usize,
    },

    #[error("market action index {index} out of range (space size {size})")]
    MarketIndexOutOfRange { index: usize, size: usize },

    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate normalization range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },

    #[error("discount factor {0} outside [0, 1)")]
    InvalidDiscount(f64),

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("grid {width}x{height} cannot hold {needed} distinct placements")]
    GridTooSmall {
        width: usize,
        height: usize,
        needed: usize,
    },

    #[error("replay buffer holds {available} transitions, batch needs {needed}")]
    InsufficientReplay { available: usize, needed: usize },

    #[error("empty rollout")]
    EmptyRollout,

    #[error("unsupported market kind {0:?} for this environment")]
    UnsupportedMarket(crate::market::MarketKind),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
