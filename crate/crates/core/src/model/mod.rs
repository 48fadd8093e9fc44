//! Shared domain vocabulary: grid geometry, problems, boundary-condition
//! scenarios and their image encodings.

mod domain;
mod grid;
mod problem;
mod scenario;

use thiserror::Error;

pub use domain::{DensityField, DesignDomain};
pub use grid::Grid;
pub use problem::{rasterize_load, ProblemSpec, ANGLE_STEPS, VF_GRID};
pub use scenario::{
    catalog_document, catalog_hash, enumerate_bc_scenarios, fixed_dofs, node_fixity,
    rasterize_bc, removes_rigid_modes, BcScenario, Constraint, Corner, Edge, Fixity, Half,
    NodeFixity, NodeRegion, SCENARIO_COUNT,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid design domain: {0}")]
    InvalidDomain(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("density {value} at element {index} is outside [0, 1]")]
    DensityOutOfRange { index: usize, value: f64 },
    #[error("density at element {index} is not finite")]
    NonFiniteDensity { index: usize },
}
