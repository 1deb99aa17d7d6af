use thiserror::Error;

/// Errors surfaced by model construction, configuration and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("frame mismatch: expected {expected:?}, got {got:?}")]
    FrameMismatch {
        expected: crate::kinodyn::Frame,
        got: crate::kinodyn::Frame,
    },

    #[error("empty metrics window")]
    EmptyWindow,

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
