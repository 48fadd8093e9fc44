//! Topology-optimization engine and dataset factory.
//!
//! The pipeline runs a problem through a plane-stress FEM solve on the solid
//! domain to get its initial physical fields, a SIMP compliance minimization
//! to get the reference structure, and a channel encoding that writes both to
//! a portable binary sample file. Predicted structures are scored against the
//! references with pixel, volume and compliance metrics.

pub mod dataset;
pub mod fem;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod simp;

/// Version string recorded in sample metadata and manifests.
pub const GENERATOR_VERSION: &str = concat!("topofield/", env!("CARGO_PKG_VERSION"));
