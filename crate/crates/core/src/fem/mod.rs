//! Plane-stress finite-element analysis on the element grid.

mod banded;
mod element;
mod fields;
mod system;

use thiserror::Error;

pub use banded::{BandedCholesky, BandedMatrix};
pub use element::{
    element_stiffness, plane_stress_matrix, quadratic_form, strain_displacement, ElementMatrix,
};
pub use fields::{compute_fields, strain_energy_density, von_mises, FieldBundle};
pub(crate) use system::check_density;
pub use system::{
    assemble_and_solve, compliance, element_displacements, element_energies, NodalLoad,
    FemSolver, StaticProblem, StiffnessSystem, BACKWARD_ERROR_TOL, RESIDUAL_TOL,
};

use crate::model::{DensityField, DesignDomain, ProblemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("stiffness matrix is singular or indefinite at dof {dof}; supports leave a rigid mode free")]
    SingularSystem { dof: usize },
    #[error("density field contains non-finite values")]
    NonFiniteInput,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("relative residual {relative:e} exceeds tolerance")]
    ResidualTooLarge { relative: f64 },
}

/// Fields on the solid (all-ones) domain for a problem. The penalty does not
/// matter at full density.
pub fn initial_fields(spec: &ProblemSpec, domain: &DesignDomain) -> Result<FieldBundle, FemError> {
    let solid = DensityField::uniform(domain, 1.0).expect("1.0 is a valid density");
    let problem = StaticProblem::from_spec(spec, domain);
    let u = assemble_and_solve(&solid, &problem, domain, 1.0)?;
    Ok(compute_fields(&u, &solid, domain, 1.0))
}
