use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("support violation: q has zero mass at index {0} where p is positive")]
    SupportViolation(usize),

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("invalid step: t = {t}, h = {h}")]
    InvalidStep { t: f64, h: f64 },

    #[error("velocity is singular at t = {0}")]
    SingularTime(f64),

    #[error("graph has {nodes} nodes, canonical form supports at most {max}")]
    GraphTooLarge { nodes: usize, max: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no bond between nodes {0} and {1}")]
    MissingBond(usize, usize),

    #[error("state has zero likelihood under every coupling pair")]
    UnreachableState,

    #[error("target token has zero predicted mass at dimension {0}")]
    LossOverflow(usize),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("all particle weights are zero or non-finite")]
    DegenerateWeights,

    #[error("budget mismatch: budgets sum to {sum}, expected {expected}")]
    BudgetMismatch { sum: usize, expected: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
