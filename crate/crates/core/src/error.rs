use thiserror::Error;

use crate::model::ValidationErrors;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(#[from] ValidationErrors),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error("not enough points to fit a slope: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[cfg(feature = "harness")]
    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
