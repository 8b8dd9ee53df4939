//! Topology-adaptive graph convolution.
//!
//! Polynomial filters of a normalized adjacency matrix, the spectral tools
//! that explain them, and a semi-supervised node classifier trained with
//! hand-written gradients.

#[cfg(feature = "cli")]
pub mod cli;
pub mod data;
pub mod error;
pub mod filters;
pub mod graph;
pub mod nn;
pub mod power;
pub mod shift;
pub mod spectral;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{build_graph, degrees, make_cyclic_graph, path_weight_sum, Graph};
pub use shift::{normalize, spmv, OperatorKind, ShiftOperator};
