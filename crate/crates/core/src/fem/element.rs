//! Bilinear quadrilateral plane-stress element on a square of side `h`.
//!
//! Local dof order is `[ux, uy]` for the nodes bottom-left, bottom-right,
//! top-right, top-left. Strain vectors use engineering shear `(e11, e22, g12)`.

use crate::model::DesignDomain;

pub type ElementMatrix = [[f64; 8]; 8];

/// Reference coordinates of the four nodes, same order as the local dofs.
const NODE_XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const NODE_ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

/// Plane-stress constitutive matrix for unit Young's modulus.
pub fn plane_stress_matrix(poisson: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - poisson * poisson);
    [
        [c, c * poisson, 0.0],
        [c * poisson, c, 0.0],
        [0.0, 0.0, c * (1.0 - poisson) / 2.0],
    ]
}

/// Strain-displacement matrix `B` at reference point `(xi, eta)`.
pub fn strain_displacement(xi: f64, eta: f64, size: f64) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    let scale = 2.0 / size;
    for i in 0..4 {
        let dx = scale * NODE_XI[i] * (1.0 + eta * NODE_ETA[i]) / 4.0;
        let dy = scale * NODE_ETA[i] * (1.0 + xi * NODE_XI[i]) / 4.0;
        b[0][2 * i] = dx;
        b[1][2 * i + 1] = dy;
        b[2][2 * i] = dy;
        b[2][2 * i + 1] = dx;
    }
    b
}

/// Unit-modulus element stiffness `k0`, integrated with 2x2 Gauss points.
pub fn element_stiffness(domain: &DesignDomain) -> ElementMatrix {
    let d = plane_stress_matrix(domain.poisson);
    let h = domain.element_size;
    let det_j = h * h / 4.0;
    let g = 1.0 / 3f64.sqrt();
    let mut k = [[0.0; 8]; 8];
    for xi in [-g, g] {
        for eta in [-g, g] {
            let b = strain_displacement(xi, eta, h);
            // db = D * B
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = (0..3).map(|m| d[r][m] * b[m][c]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    let v: f64 = (0..3).map(|m| b[m][i] * db[m][j]).sum();
                    k[i][j] += v * det_j * domain.thickness;
                }
            }
        }
    }
    // symmetrize away round-off so downstream band storage can assume it
    for i in 0..8 {
        for j in 0..i {
            let avg = 0.5 * (k[i][j] + k[j][i]);
            k[i][j] = avg;
            k[j][i] = avg;
        }
    }
    k
}

/// `u^T k u` for an element displacement vector.
pub fn quadratic_form(k: &ElementMatrix, u: &[f64; 8]) -> f64 {
    let mut total = 0.0;
    for i in 0..8 {
        let row: f64 = (0..8).map(|j| k[i][j] * u[j]).sum();
        total += u[i] * row;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form Q4 stiffness for a unit square, unit modulus and thickness.
    fn closed_form(nu: f64) -> ElementMatrix {
        let k = [
            0.5 - nu / 6.0,
            0.125 + nu / 8.0,
            -0.25 - nu / 12.0,
            -0.125 + 3.0 * nu / 8.0,
            -0.25 + nu / 12.0,
            -0.125 - nu / 8.0,
            nu / 6.0,
            0.125 - 3.0 * nu / 8.0,
        ];
        let idx = [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ];
        let c = 1.0 / (1.0 - nu * nu);
        let mut out = [[0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                out[i][j] = c * k[idx[i][j]];
            }
        }
        out
    }

    #[test]
    fn matches_closed_form() {
        for nu in [0.0, 0.3, 0.45] {
            let mut dom = DesignDomain::default();
            dom.poisson = nu;
            let k = element_stiffness(&dom);
            let r = closed_form(nu);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((k[i][j] - r[i][j]).abs() < 1e-14, "nu={nu} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn first_diagonal_entry() {
        let k = element_stiffness(&DesignDomain::default());
        let nu: f64 = 0.3;
        let expect = (0.5 - nu / 6.0) / (1.0 - nu * nu);
        assert!((k[0][0] - expect).abs() < 1e-15);
    }

    #[test]
    fn symmetric_with_rigid_null_space() {
        let k = element_stiffness(&DesignDomain::default());
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(k[i][j], k[j][i]);
            }
        }
        let tx = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let ty = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        // rotation about the centre: u = (-y, x) at nodes (+-1/2, +-1/2)
        let rot = [0.5, -0.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5];
        for v in [tx, ty, rot] {
            for row in &k {
                let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(s.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_is_five() {
        // Gaussian elimination with full pivoting on a copy
        let mut m = element_stiffness(&DesignDomain::default());
        let mut rank = 0;
        let mut rows: Vec<usize> = (0..8).collect();
        for col in 0..8 {
            let Some((pos, _)) = rows
                .iter()
                .enumerate()
                .map(|(p, &r)| (p, m[r][col].abs()))
                .filter(|&(_, v)| v > 1e-12)
                .max_by(|a, b| a.1.total_cmp(&b.1))
            else {
                continue;
            };
            let pr = rows.remove(pos);
            rank += 1;
            for &r in &rows {
                let f = m[r][col] / m[pr][col];
                for c in 0..8 {
                    m[r][c] -= f * m[pr][c];
                }
            }
        }
        assert_eq!(rank, 5);
    }

    #[test]
    fn stiffness_independent_of_element_size() {
        let mut dom = DesignDomain::default();
        let k1 = element_stiffness(&dom);
        dom.element_size = 2.5;
        let k2 = element_stiffness(&dom);
        for i in 0..8 {
            for j in 0..8 {
                assert!((k1[i][j] - k2[i][j]).abs() < 1e-14);
            }
        }
    }
}
