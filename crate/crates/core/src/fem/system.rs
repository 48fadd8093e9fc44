use std::io::{self, Write};

use super::banded::BandedMatrix;
use super::element::{element_stiffness, quadratic_form, ElementMatrix};
use super::FemError;
use crate::model::{fixed_dofs, Constraint, DensityField, DesignDomain, Grid, ProblemSpec};

/// Relative residual every accepted solve must reach, unless it is below the
/// rounding floor (see [`BACKWARD_ERROR_TOL`]).
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Bound on `|KU - F| / (||K| |U|| + |F|)` for solves whose relative residual
/// misses [`RESIDUAL_TOL`]. Designs whose load path runs through the `Emin`
/// floor reach displacements near `1/Emin`, and f64 cannot hold `U` finely
/// enough for the relative bound there.
pub const BACKWARD_ERROR_TOL: f64 = 1e-12;

/// Point force on a node, y pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalLoad {
    pub node: usize,
    pub fx: f64,
    pub fy: f64,
}

/// Supports and nodal forces on a domain, independent of the material layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticProblem {
    fixed: Vec<bool>,
    force: Vec<f64>,
}

impl StaticProblem {
    pub fn new(domain: &DesignDomain, constraints: &[Constraint], loads: &[NodalLoad]) -> Self {
        let n = domain.dof_count();
        let mut fixed = vec![false; n];
        for d in fixed_dofs(constraints, domain) {
            fixed[d] = true;
        }
        let mut force = vec![0.0; n];
        for l in loads {
            force[2 * l.node] += l.fx;
            force[2 * l.node + 1] += l.fy;
        }
        Self { fixed, force }
    }

    pub fn from_spec(spec: &ProblemSpec, domain: &DesignDomain) -> Self {
        let (fx, fy) = spec.load_components();
        Self::new(
            domain,
            &spec.scenario.constraints,
            &[NodalLoad {
                node: spec.load_node,
                fx,
                fy,
            }],
        )
    }

    pub fn dof_count(&self) -> usize {
        self.force.len()
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof]
    }

    pub fn fixed_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.fixed.iter().enumerate().filter_map(|(i, &f)| f.then_some(i))
    }

    /// Force vector with reactions at fixed dofs removed.
    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            fixed: self.fixed.clone(),
            force: self.force.iter().map(|f| f * alpha).collect(),
        }
    }
}

/// Assembled global system `K U = F` with fixed dofs eliminated by identity
/// rows.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    matrix: BandedMatrix,
    force: Vec<f64>,
    fixed: Vec<bool>,
    moduli: Vec<f64>,
    ke: ElementMatrix,
    domain: DesignDomain,
}

impl StiffnessSystem {
    pub fn assemble(
        density: &DensityField,
        problem: &StaticProblem,
        domain: &DesignDomain,
        penal: f64,
    ) -> Result<Self, FemError> {
        Self::assemble_into(None, density, problem, domain, penal)
    }

    fn assemble_into(
        buffer: Option<BandedMatrix>,
        density: &DensityField,
        problem: &StaticProblem,
        domain: &DesignDomain,
        penal: f64,
    ) -> Result<Self, FemError> {
        check_density(density, domain)?;
        if problem.dof_count() != domain.dof_count() {
            return Err(FemError::ShapeMismatch {
                expected: (domain.dof_count(), 1),
                found: (problem.dof_count(), 1),
            });
        }
        let ke = element_stiffness(domain);
        // element dofs span two node columns plus one node
        let bw = 2 * (domain.nely + 1) + 3;
        let n = domain.dof_count();
        let mut k = match buffer {
            Some(mut b) if b.order() == n && b.bandwidth() == bw => {
                b.clear();
                b
            }
            _ => BandedMatrix::zeros(n, bw),
        };
        let moduli: Vec<f64> = density
            .values()
            .iter()
            .map(|&y| domain.penalized_modulus(y, penal))
            .collect();
        for row in 0..domain.nely {
            for col in 0..domain.nelx {
                let e = moduli[row * domain.nelx + col];
                let dofs = domain.element_dofs(row, col);
                for a in 0..8 {
                    for b in 0..=a {
                        k.add(dofs[a], dofs[b], e * ke[a][b]);
                    }
                }
            }
        }
        let mut force = problem.force.clone();
        for d in problem.fixed_dofs() {
            k.constrain(d);
            force[d] = 0.0;
        }
        Ok(Self {
            matrix: k,
            force,
            fixed: problem.fixed.clone(),
            moduli,
            ke,
            domain: *domain,
        })
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    /// `K U` evaluated element by element, identity rows at fixed dofs.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.apply_with(u, |k| k, |v| v)
    }

    /// `|K| |U|`, the scale of the rounding error in `K U`.
    fn apply_abs(&self, u: &[f64]) -> Vec<f64> {
        self.apply_with(u, f64::abs, f64::abs)
    }

    fn apply_with(&self, u: &[f64], fk: impl Fn(f64) -> f64, fu: impl Fn(f64) -> f64) -> Vec<f64> {
        let dom = &self.domain;
        let ke = self.ke.map(|row| row.map(&fk));
        let mut out = vec![0.0; u.len()];
        for row in 0..dom.nely {
            for col in 0..dom.nelx {
                let e = self.moduli[row * dom.nelx + col];
                let dofs = dom.element_dofs(row, col);
                let ue = dofs.map(|d| if self.fixed[d] { 0.0 } else { fu(u[d]) });
                for a in 0..8 {
                    let s: f64 = (0..8).map(|b| ke[a][b] * ue[b]).sum();
                    out[dofs[a]] += e * s;
                }
            }
        }
        for (d, &f) in self.fixed.iter().enumerate() {
            if f {
                out[d] = fu(u[d]);
            }
        }
        out
    }

    pub fn residual_norm(&self, u: &[f64]) -> f64 {
        let ku = self.apply(u);
        norm_diff(&ku, &self.force)
    }

    /// Normwise backward error `|KU - F| / (||K| |U|| + |F|)`.
    pub fn backward_error(&self, u: &[f64]) -> f64 {
        let scale = norm_diff(&self.apply_abs(u), &[]) + norm_diff(&self.force, &[]);
        if scale == 0.0 {
            return 0.0;
        }
        self.residual_norm(u) / scale
    }

    pub fn solve(self) -> Result<Vec<f64>, FemError> {
        self.solve_recycling().0
    }

    /// Direct solve with up to two steps of iterative refinement. Returns the
    /// matrix storage for reuse.
    ///
    /// A solve is accepted when the relative residual meets [`RESIDUAL_TOL`]
    /// or, failing that, the backward error meets [`BACKWARD_ERROR_TOL`].
    fn solve_recycling(self) -> (Result<Vec<f64>, FemError>, Option<BandedMatrix>) {
        let Self {
            matrix,
            force,
            fixed,
            moduli,
            ke,
            domain,
        } = self;
        let chol = match matrix.factorize() {
            Ok(c) => c,
            Err(e) => return (Err(e), None),
        };
        // rebuild a matrix-free view for residuals
        let view = Self {
            matrix: BandedMatrix::zeros(0, 0),
            force,
            fixed,
            moduli,
            ke,
            domain,
        };
        let fnorm = norm_diff(&view.force, &[]);
        if fnorm == 0.0 {
            return (Ok(vec![0.0; view.force.len()]), Some(chol.into_storage()));
        }
        let mut u = chol.solve(&view.force);
        let mut ku = view.apply(&u);
        let mut rel = norm_diff(&ku, &view.force) / fnorm;
        for _ in 0..2 {
            if rel <= 1e-12 {
                break;
            }
            let r: Vec<f64> = view.force.iter().zip(&ku).map(|(f, k)| f - k).collect();
            let du = chol.solve(&r);
            for (x, d) in u.iter_mut().zip(&du) {
                *x += d;
            }
            ku = view.apply(&u);
            rel = norm_diff(&ku, &view.force) / fnorm;
        }
        let storage = Some(chol.into_storage());
        let accepted = rel <= RESIDUAL_TOL || {
            let be = view.backward_error(&u);
            log::debug!("relative residual {rel:e}, backward error {be:e}");
            be <= BACKWARD_ERROR_TOL
        };
        if !rel.is_finite() || !accepted {
            return (Err(FemError::ResidualTooLarge { relative: rel }), storage);
        }
        (Ok(u), storage)
    }

    /// Writes the lower triangle of `K` as `row col value` lines (0-based).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# n={} lower-triangle triplets", self.matrix.order())?;
        for (i, j, v) in self.matrix.lower_triplets() {
            writeln!(out, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Repeated solves on one domain, reusing the matrix allocation.
#[derive(Debug, Default)]
pub struct FemSolver {
    buffer: Option<BandedMatrix>,
}

impl FemSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(
        &mut self,
        density: &DensityField,
        problem: &StaticProblem,
        domain: &DesignDomain,
        penal: f64,
    ) -> Result<Vec<f64>, FemError> {
        let system =
            StiffnessSystem::assemble_into(self.buffer.take(), density, problem, domain, penal)?;
        let (result, storage) = system.solve_recycling();
        self.buffer = storage;
        result
    }
}

/// Euclidean norm of `a - b`; an empty `b` is treated as zeros.
fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, x)| {
            let d = x - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}


pub(crate) fn check_density(density: &DensityField, domain: &DesignDomain) -> Result<(), FemError> {
    if !density.matches(domain) {
        return Err(FemError::ShapeMismatch {
            expected: (domain.nely, domain.nelx),
            found: density.shape(),
        });
    }
    if density.values().iter().any(|v| !v.is_finite()) {
        return Err(FemError::NonFiniteInput);
    }
    Ok(())
}

/// Assembles `K(y)` with `E_e = Emin + y_e^p (E - Emin)` and solves `K U = F`.
/// Fixed dofs of the result are exactly zero.
pub fn assemble_and_solve(
    density: &DensityField,
    problem: &StaticProblem,
    domain: &DesignDomain,
    penal: f64,
) -> Result<Vec<f64>, FemError> {
    FemSolver::new().solve(density, problem, domain, penal)
}

pub fn element_displacements(u: &[f64], domain: &DesignDomain, row: usize, col: usize) -> [f64; 8] {
    domain.element_dofs(row, col).map(|d| u[d])
}

/// `u_e^T k0 u_e` for every element.
pub fn element_energies(u: &[f64], domain: &DesignDomain, ke: &ElementMatrix) -> Grid<f64> {
    Grid::from_fn(domain.nely, domain.nelx, |row, col| {
        quadratic_form(ke, &element_displacements(u, domain, row, col))
    })
}

/// Compliance `sum_e E_e(y_e) u_e^T k0 u_e`, which equals `F . U` for a
/// consistent solve.
pub fn compliance(density: &DensityField, u: &[f64], domain: &DesignDomain, penal: f64) -> f64 {
    let ke = element_stiffness(domain);
    let energies = element_energies(u, domain, &ke);
    density
        .values()
        .iter()
        .zip(energies.iter())
        .map(|(&y, &w)| domain.penalized_modulus(y, penal) * w)
        .sum()
}
