//! Element-wise physical fields recovered from a displacement solution.

use super::element::{plane_stress_matrix, strain_displacement};
use super::system::element_displacements;
use crate::model::{DensityField, DesignDomain, Grid};

/// Centroid values of the initial physical fields, one value per element.
/// Shear strain `e12` is the tensor component (half the engineering shear).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBundle {
    pub ux: Grid<f64>,
    pub uy: Grid<f64>,
    pub s11: Grid<f64>,
    pub s22: Grid<f64>,
    pub s12: Grid<f64>,
    pub e11: Grid<f64>,
    pub e22: Grid<f64>,
    pub e12: Grid<f64>,
    pub von_mises: Grid<f64>,
    pub strain_energy: Grid<f64>,
}

impl FieldBundle {
    /// Common grid shape, or `None` if the members disagree.
    pub fn shape(&self) -> Option<(usize, usize)> {
        let s = self.ux.shape();
        [
            &self.uy,
            &self.s11,
            &self.s22,
            &self.s12,
            &self.e11,
            &self.e22,
            &self.e12,
            &self.von_mises,
            &self.strain_energy,
        ]
        .iter()
        .all(|g| g.shape() == s)
        .then_some(s)
    }
}

pub fn von_mises(s11: f64, s22: f64, s12: f64) -> f64 {
    // clamp guards tiny negative round-off under the root
    (s11 * s11 - s11 * s22 + s22 * s22 + 3.0 * s12 * s12)
        .max(0.0)
        .sqrt()
}

/// `W = 1/2 (s11 e11 + s22 e22 + 2 s12 e12)` with tensor shear strain.
pub fn strain_energy_density(stress: [f64; 3], strain: [f64; 3]) -> f64 {
    0.5 * (stress[0] * strain[0] + stress[1] * strain[1] + 2.0 * stress[2] * strain[2])
}

pub fn compute_fields(
    u: &[f64],
    density: &DensityField,
    domain: &DesignDomain,
    penal: f64,
) -> FieldBundle {
    let (rows, cols) = (domain.nely, domain.nelx);
    let zero = || Grid::filled(rows, cols, 0.0);
    let mut f = FieldBundle {
        ux: zero(),
        uy: zero(),
        s11: zero(),
        s22: zero(),
        s12: zero(),
        e11: zero(),
        e22: zero(),
        e12: zero(),
        von_mises: zero(),
        strain_energy: zero(),
    };
    let b = strain_displacement(0.0, 0.0, domain.element_size);
    let d = plane_stress_matrix(domain.poisson);
    for row in 0..rows {
        for col in 0..cols {
            let ue = element_displacements(u, domain, row, col);
            let mut eng = [0.0; 3];
            for (k, e) in eng.iter_mut().enumerate() {
                *e = (0..8).map(|j| b[k][j] * ue[j]).sum();
            }
            let modulus = domain.penalized_modulus(density.get(row, col), penal);
            let mut s = [0.0; 3];
            for (k, sk) in s.iter_mut().enumerate() {
                *sk = modulus * (0..3).map(|m| d[k][m] * eng[m]).sum::<f64>();
            }
            let strain = [eng[0], eng[1], 0.5 * eng[2]];
            let cell = (row, col);
            f.ux[cell] = 0.25 * (ue[0] + ue[2] + ue[4] + ue[6]);
            f.uy[cell] = 0.25 * (ue[1] + ue[3] + ue[5] + ue[7]);
            f.s11[cell] = s[0];
            f.s22[cell] = s[1];
            f.s12[cell] = s[2];
            f.e11[cell] = strain[0];
            f.e22[cell] = strain[1];
            f.e12[cell] = strain[2];
            f.von_mises[cell] = von_mises(s[0], s[1], s[2]);
            f.strain_energy[cell] = strain_energy_density(s, strain).max(0.0);
        }
    }
    f
}
