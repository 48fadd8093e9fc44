//! SIMP compliance minimization with a sensitivity filter and
//! optimality-criteria updates.

mod filter;
mod oc;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{filter_sensitivity, SensitivityFilter, FILTER_DENSITY_FLOOR};
pub use oc::oc_update;

use crate::fem::{
    check_density, compliance, element_energies, element_stiffness, FemError, FemSolver,
    StaticProblem,
};
use crate::model::{DensityField, DesignDomain, Grid, ModelError, ProblemSpec};

#[derive(Debug, Error)]
pub enum SimpError {
    #[error("invalid SIMP configuration: {0}")]
    InvalidConfig(String),
    #[error("optimality-criteria bisection failed: {reason}")]
    BisectionFailure { reason: String },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimpConfig {
    pub penal: f64,
    pub filter_radius: f64,
    pub move_limit: f64,
    pub oc_damping: f64,
    pub max_iters: usize,
    /// Stop once `max |y_new - y|` falls below this.
    pub change_tol: f64,
    pub vf_bisect_tol: f64,
}

impl Default for SimpConfig {
    /// Dataset-generation settings: penalty 2, filter radius 1.5.
    fn default() -> Self {
        Self {
            penal: 2.0,
            filter_radius: 1.5,
            move_limit: 0.2,
            oc_damping: 0.5,
            max_iters: 100,
            change_tol: 0.01,
            vf_bisect_tol: 1e-4,
        }
    }
}

impl SimpConfig {
    pub fn validate(&self) -> Result<(), SimpError> {
        let fail = |m: &str| Err(SimpError::InvalidConfig(m.to_string()));
        if !(self.penal >= 1.0 && self.penal.is_finite()) {
            return fail("penal must be finite and >= 1");
        }
        if !(self.filter_radius > 0.0 && self.filter_radius.is_finite()) {
            return fail("filter_radius must be positive");
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return fail("move_limit must lie in (0, 1]");
        }
        if !(self.oc_damping > 0.0 && self.oc_damping <= 1.0) {
            return fail("oc_damping must lie in (0, 1]");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1");
        }
        if !(self.change_tol > 0.0) {
            return fail("change_tol must be positive");
        }
        if !(self.vf_bisect_tol > 0.0 && self.vf_bisect_tol < 1.0) {
            return fail("vf_bisect_tol must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One optimization step. `compliance` belongs to the design entering the
/// step; `volume_fraction` and `change` describe the updated design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub compliance: f64,
    pub volume_fraction: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Compliance of the uniform starting design.
    pub initial_compliance: f64,
    /// Compliance of the returned design.
    pub final_compliance: f64,
}

impl OptimizationTrace {
    /// Comma-separated `iteration,compliance,volume_fraction,change` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,compliance,volume_fraction,change")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e}",
                r.iteration, r.compliance, r.volume_fraction, r.change
            )?;
        }
        Ok(())
    }
}

/// `dc_e = -p y_e^(p-1) (E - Emin) u_e^T k0 u_e`, the derivative of the
/// equilibrium compliance with respect to each density.
pub fn sensitivity(
    density: &DensityField,
    u: &[f64],
    domain: &DesignDomain,
    penal: f64,
) -> Grid<f64> {
    let ke = element_stiffness(domain);
    let energies = element_energies(u, domain, &ke);
    sensitivity_from_energies(density, &energies, domain, penal)
}

fn sensitivity_from_energies(
    density: &DensityField,
    energies: &Grid<f64>,
    domain: &DesignDomain,
    penal: f64,
) -> Grid<f64> {
    let de = domain.youngs_modulus - domain.youngs_min;
    let y = density.values();
    Grid::from_fn(y.rows(), y.cols(), |r, c| {
        -penal * y[(r, c)].powf(penal - 1.0) * de * energies[(r, c)]
    })
}

/// Runs the optimizer on a sampled problem.
pub fn optimize(
    spec: &ProblemSpec,
    domain: &DesignDomain,
    config: &SimpConfig,
) -> Result<(DensityField, OptimizationTrace), SimpError> {
    spec.validate(domain)?;
    optimize_problem(&StaticProblem::from_spec(spec, domain), spec.vf_target, domain, config)
}

/// Runs the optimizer from the uniform design `y = vf_target` on arbitrary
/// supports and loads.
pub fn optimize_problem(
    problem: &StaticProblem,
    vf_target: f64,
    domain: &DesignDomain,
    config: &SimpConfig,
) -> Result<(DensityField, OptimizationTrace), SimpError> {
    config.validate()?;
    domain.validate()?;
    if !(vf_target > 0.0 && vf_target <= 1.0) {
        return Err(SimpError::InvalidConfig(format!(
            "volume fraction {vf_target} outside (0, 1]"
        )));
    }
    let p = config.penal;
    let ke = element_stiffness(domain);
    let filter = SensitivityFilter::new(config.filter_radius);
    let mut solver = FemSolver::new();
    let mut y = DensityField::uniform(domain, vf_target)?;
    let mut records = Vec::with_capacity(config.max_iters);
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        let u = solver.solve(&y, problem, domain, p)?;
        let energies = element_energies(&u, domain, &ke);
        let c: f64 = y
            .values()
            .iter()
            .zip(energies.iter())
            .map(|(&ye, &w)| domain.penalized_modulus(ye, p) * w)
            .sum();
        let dc = sensitivity_from_energies(&y, &energies, domain, p);
        let dc = filter.apply(&dc, &y);
        let next = oc_update(&y, &dc, vf_target, config)?;
        let change = next.values().max_abs_diff(y.values());
        y = next;
        let record = IterationRecord {
            iteration,
            compliance: c,
            volume_fraction: y.volume_fraction(),
            change,
        };
        log::trace!(
            "it {iteration}: c = {c:.6e}, vf = {:.5}, change = {change:.4}",
            record.volume_fraction
        );
        records.push(record);
        if change < config.change_tol {
            converged = true;
            break;
        }
    }

    check_density(&y, domain)?;
    let u = solver.solve(&y, problem, domain, p)?;
    let trace = OptimizationTrace {
        iterations: records.len(),
        converged,
        initial_compliance: records[0].compliance,
        final_compliance: compliance(&y, &u, domain, p),
        records,
    };
    Ok((y, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_generation_settings() {
        let c = SimpConfig::default();
        assert_eq!((c.penal, c.filter_radius), (2.0, 1.5));
        assert_eq!((c.move_limit, c.oc_damping, c.max_iters), (0.2, 0.5, 100));
        assert_eq!((c.change_tol, c.vf_bisect_tol), (0.01, 1e-4));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SimpConfig::default();
        for bad in [
            SimpConfig { penal: 0.5, ..base },
            SimpConfig { filter_radius: 0.0, ..base },
            SimpConfig { move_limit: 1.5, ..base },
            SimpConfig { oc_damping: 0.0, ..base },
            SimpConfig { max_iters: 0, ..base },
        ] {
            assert!(matches!(bad.validate(), Err(SimpError::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_displacement_gives_zero_sensitivity() {
        let dom = DesignDomain::with_size(4, 3);
        let y = DensityField::uniform(&dom, 0.5).unwrap();
        let dc = sensitivity(&y, &vec![0.0; dom.dof_count()], &dom, 3.0);
        assert!(dc.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<SimpConfig>(r#"{"penal": 3, "radius": 2}"#);
        assert!(err.is_err());
        let ok: SimpConfig = serde_json::from_str(r#"{"penal": 3}"#).unwrap();
        assert_eq!(ok.penal, 3.0);
        assert_eq!(ok.filter_radius, 1.5);
    }
}
