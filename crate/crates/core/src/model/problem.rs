use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BcScenario, DesignDomain, Grid, ModelError};

/// Admissible target volume fractions, 0.30 to 0.50 in steps of 0.02.
pub const VF_GRID: [f64; 11] = [0.30, 0.32, 0.34, 0.36, 0.38, 0.40, 0.42, 0.44, 0.46, 0.48, 0.50];

/// Number of admissible load directions, `k * pi / 6` for `k = 0..=6`.
pub const ANGLE_STEPS: u8 = 7;

/// One optimization problem: material budget, supports and a single point load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub vf_target: f64,
    pub scenario: BcScenario,
    /// Boundary node receiving the load.
    pub load_node: usize,
    /// Load direction index `k`; the angle is `k * pi / 6` from +x toward +y (up).
    pub load_angle_step: u8,
    pub load_magnitude: f64,
}

impl ProblemSpec {
    pub fn new(
        vf_target: f64,
        scenario: BcScenario,
        load_node: usize,
        load_angle_step: u8,
        domain: &DesignDomain,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            vf_target,
            scenario,
            load_node,
            load_angle_step,
            load_magnitude: 1.0,
        };
        spec.validate(domain)?;
        Ok(spec)
    }

    pub fn load_angle(&self) -> f64 {
        self.load_angle_step as f64 * PI / 6.0
    }

    /// Load components `(fx, fy)`, y pointing up. Tabulated so that axis
    /// directions have exactly zero cross components.
    pub fn load_components(&self) -> (f64, f64) {
        const H: f64 = 0.5;
        let r = 3f64.sqrt() / 2.0;
        let (c, s) = match self.load_angle_step {
            0 => (1.0, 0.0),
            1 => (r, H),
            2 => (H, r),
            3 => (0.0, 1.0),
            4 => (-H, r),
            5 => (-r, H),
            _ => (-1.0, 0.0),
        };
        (c * self.load_magnitude, s * self.load_magnitude)
    }

    /// True when every nonzero load component acts on a constrained dof of the
    /// load node, so the supports absorb the load and the structure does no
    /// work.
    pub fn load_is_resisted_only_by_supports(&self, domain: &DesignDomain) -> bool {
        let fix = self.scenario.node_fixity(domain)[self.load_node];
        let (fx, fy) = self.load_components();
        (fx == 0.0 || fix.ux) && (fy == 0.0 || fix.uy)
    }

    pub fn validate(&self, domain: &DesignDomain) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidProblem(msg));
        if !VF_GRID.contains(&self.vf_target) {
            return bad(format!("volume fraction {} is not on the 0.30:0.02:0.50 grid", self.vf_target));
        }
        if self.load_angle_step >= ANGLE_STEPS {
            return bad(format!("load angle step {} exceeds 6", self.load_angle_step));
        }
        if !(self.load_magnitude.is_finite() && self.load_magnitude > 0.0) {
            return bad("load magnitude must be positive".into());
        }
        if !domain.is_boundary_node(self.load_node) {
            return bad(format!("load node {} is not on the boundary", self.load_node));
        }
        if self.scenario.node_fixity(domain)[self.load_node].is_pinned() {
            return bad(format!("load node {} is fully pinned", self.load_node));
        }
        if self.load_is_resisted_only_by_supports(domain) {
            return bad(format!(
                "load at node {} points along its constrained direction",
                self.load_node
            ));
        }
        if !self.scenario.removes_rigid_modes(domain) {
            return bad(format!("scenario {} leaves rigid-body modes free", self.scenario.id));
        }
        Ok(())
    }
}

/// Load channels `(Fx, Fy)`: the load is spread evenly over the elements
/// touching the load node; every other cell is zero.
pub fn rasterize_load(spec: &ProblemSpec, domain: &DesignDomain) -> (Grid<f64>, Grid<f64>) {
    let mut fx = Grid::filled(domain.nely, domain.nelx, 0.0);
    let mut fy = Grid::filled(domain.nely, domain.nelx, 0.0);
    let (lx, ly) = spec.load_components();
    let cells = domain.elements_around_node(spec.load_node);
    let share = 1.0 / cells.len() as f64;
    for cell in cells {
        fx[cell] += lx * share;
        fy[cell] += ly * share;
    }
    (fx, fy)
}
