use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem size {0}: n must be at least 1")]
    InvalidSize(usize),

    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("invalid sampling policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid algorithm: {0}")]
    InvalidAlgorithm(String),

    #[error("no exact spectrum: {0}")]
    NoExactSpectrum(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("exact computation intractable: {0}")]
    Intractable(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
