use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point left the domain of the angle/range beam-split map.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rank deficient matrix: {0}")]
    RankDeficient(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at round {round}: loss {loss:e} exceeds {limit:e}")]
    Divergence { round: usize, loss: f64, limit: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
