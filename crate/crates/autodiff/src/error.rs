use thiserror::Error;

/// Errors raised by tensor construction, graph operations and archives.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid configuration for {op}: {detail}")]
    Config { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn dim_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(TensorError::Dimension { op, detail: detail.into() })
}

pub(crate) fn config_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(TensorError::Config { op, detail: detail.into() })
}
