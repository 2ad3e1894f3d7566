use std::path::PathBuf;

use handpose_autodiff::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0} mm: depth must be positive")]
    InvalidDepth(f64),

    #[error("point lies behind the camera (z = {0} mm)")]
    BehindCamera(f64),

    #[error("invalid crop: {0}")]
    InvalidCrop(String),

    #[error("no hand found: the frame has no nonzero depth pixel")]
    NoHand,

    #[error("crop rectangle lies entirely outside the image")]
    EmptyCrop,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("indexing error: {0}")]
    Index(String),

    #[error("dataset descriptor error: {0}")]
    Descriptor(String),

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error("config file: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config file: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
