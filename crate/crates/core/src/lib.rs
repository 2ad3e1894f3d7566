pub mod ablation;
pub mod bench;
pub mod camera;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod heatmap;
pub mod loss;
pub mod network;
pub mod preprocess;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
