//! Experiment harness for graph random features: kernel approximation error,
//! diffusion, kernel k-means and mesh-normal regression.

pub mod cli;
pub mod experiments;
pub mod genspec;
pub mod kmeans;
pub mod mesh;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error(transparent)]
    Core(#[from] qgrf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
