use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum DriftError {
    #[error("dimensionality mismatch: expected {expected}, found {found}")]
    Dimensionality { expected: usize, found: usize },

    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureIndex { index: usize, dim: usize },

    #[error("invalid configuration for `{key}`: {message}")]
    Configuration { key: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DriftError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        DriftError::Configuration {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DriftError>;
