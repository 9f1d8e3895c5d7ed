//! Graph random features for regularised Laplacian kernels, with antithetic
//! and offset couplings of walker termination.

pub mod coupling;
pub mod dense;
pub mod error;
pub mod features;
pub mod graph;
pub mod kernels;
pub mod rng;
pub mod stats;
pub mod theory;

pub use coupling::CouplingScheme;
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureVector, SamplingStrategy, WalkConfig};
pub use graph::Graph;
