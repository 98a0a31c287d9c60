use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("slice at node {node} lacks stencil support (supported nodes {min}..={max})")]
    MissingStencilSupport { node: usize, min: usize, max: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid duration {0}")]
    InvalidDuration(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-positive steady-state response {value} at slice node {node}")]
    NonPositiveCalibration { node: usize, value: f64 },

    #[error("invalid tau* {0}; must be positive and finite")]
    InvalidTau(f64),

    #[error("game is already finished")]
    GameFinished,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("replay store is empty")]
    EmptyReplay,

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
