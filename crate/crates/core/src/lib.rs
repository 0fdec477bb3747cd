//! Multi-relational knowledge-graph link prediction with a one-layer relational
//! graph convolution, node-level integrated-gradients explanations, and an
//! evaluation harness (cross-validation, ranking metrics, target-recovery checks).

pub mod attribution;
pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod kgraph;
pub mod model;

pub use error::{Error, Result};
