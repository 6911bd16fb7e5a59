//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Network architecture is empty, too short, or contains a zero-size layer.
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    /// A tensor or batch dimension does not match what the operation expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A class label is outside `[0, classes)`.
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    /// A configuration value violates its contract.
    #[error("invalid config: {0}")]
    Config(String),

    /// A non-finite value appeared where the math requires finite numbers.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Dataset contents violate an operation's preconditions.
    #[error("data error: {0}")]
    Data(String),

    /// An operation was applied to a value in the wrong state
    /// (e.g. injecting noise twice).
    #[error("state error: {0}")]
    State(String),

    /// A metric is undefined for the given inputs (e.g. empty confusion matrix).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A malformed row or field in a CSV file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// A checkpoint file that cannot be decoded or fails validation.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
