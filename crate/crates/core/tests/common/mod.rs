//! Independent reference implementation used as a test oracle.
//!
//! A direct port of the classic 88-line MATLAB SIMP code: closed-form
//! element matrix, column-major element order, general sparse Cholesky,
//! explicit neighbour-loop filter and a linear-bisection OC step. It shares no
//! code with the crate under test beyond the std library.
#![allow(dead_code)]

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

pub const EMIN: f64 = 1e-9;
pub const E0: f64 = 1.0;

/// Unit-modulus Q4 plane-stress stiffness in closed form.
pub fn ke(nu: f64) -> [[f64; 8]; 8] {
    let a = [0.5 - nu / 6.0, 0.125 + nu / 8.0, -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0, -0.125 - nu / 8.0, nu / 6.0, 0.125 - 3.0 * nu / 8.0];
    let k = |i: usize| a[i - 1];
    let idx = [
        [1, 2, 3, 4, 5, 6, 7, 8],
        [2, 1, 8, 7, 6, 5, 4, 3],
        [3, 8, 1, 6, 7, 4, 5, 2],
        [4, 7, 6, 1, 8, 3, 2, 5],
        [5, 6, 7, 8, 1, 2, 3, 4],
        [6, 5, 4, 3, 2, 1, 8, 7],
        [7, 4, 5, 2, 3, 8, 1, 6],
        [8, 3, 2, 5, 4, 7, 6, 1],
    ];
    let mut out = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i][j] = k(idx[i][j]) / (1.0 - nu * nu);
        }
    }
    out
}

/// Zero-based dof list of element `(elx, ely)`, `ely = 0` at the top.
pub fn edof(nely: usize, elx: usize, ely: usize) -> [usize; 8] {
    let n1 = (nely + 1) * elx + ely; // upper-left node
    let n2 = (nely + 1) * (elx + 1) + ely; // upper-right node
    [
        2 * n1 + 2, 2 * n1 + 3,
        2 * n2 + 2, 2 * n2 + 3,
        2 * n2, 2 * n2 + 1,
        2 * n1, 2 * n1 + 1,
    ]
}

/// Solves `K(x) U = F` with row-major densities `x[ely * nelx + elx]`.
pub fn fe(nelx: usize, nely: usize, x: &[f64], penal: f64, nu: f64, fixed: &[usize], f: &[f64]) -> Vec<f64> {
    let ndof = 2 * (nelx + 1) * (nely + 1);
    let k0 = ke(nu);
    let mut is_fixed = vec![false; ndof];
    for &d in fixed {
        is_fixed[d] = true;
    }
    let free: Vec<usize> = (0..ndof).filter(|&d| !is_fixed[d]).collect();
    let mut map = vec![usize::MAX; ndof];
    for (k, &d) in free.iter().enumerate() {
        map[d] = k;
    }
    let mut coo = CooMatrix::new(free.len(), free.len());
    for elx in 0..nelx {
        for ely in 0..nely {
            let e = EMIN + x[ely * nelx + elx].powf(penal) * (E0 - EMIN);
            let dofs = edof(nely, elx, ely);
            for a in 0..8 {
                for b in 0..8 {
                    let (i, j) = (map[dofs[a]], map[dofs[b]]);
                    if i != usize::MAX && j != usize::MAX {
                        coo.push(i, j, e * k0[a][b]);
                    }
                }
            }
        }
    }
    let csc = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&csc).expect("reference system is positive definite");
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&d| f[d]));
    let sol = chol.solve(&rhs);
    let mut u = vec![0.0; ndof];
    for (k, &d) in free.iter().enumerate() {
        u[d] = sol[(k, 0)];
    }
    u
}

pub struct Reference {
    /// Row-major final densities.
    pub x: Vec<f64>,
    /// Compliance of the final design.
    pub compliance: f64,
    pub iterations: usize,
}

/// SIMP with sensitivity filtering and optimality criteria.
#[allow(clippy::too_many_arguments)]
pub fn top88(
    nelx: usize,
    nely: usize,
    volfrac: f64,
    penal: f64,
    rmin: f64,
    nu: f64,
    fixed: &[usize],
    f: &[f64],
    max_iter: usize,
) -> Reference {
    let k0 = ke(nu);
    let n = nelx * nely;
    let mut x = vec![volfrac; n];
    let reach = rmin.ceil() as isize - 1;
    let mut iterations = 0;
    let energy = |u: &[f64], elx: usize, ely: usize| {
        let d = edof(nely, elx, ely);
        let mut s = 0.0;
        for a in 0..8 {
            for b in 0..8 {
                s += u[d[a]] * k0[a][b] * u[d[b]];
            }
        }
        s
    };
    loop {
        iterations += 1;
        let u = fe(nelx, nely, &x, penal, nu, fixed, f);
        let mut dc = vec![0.0; n];
        for elx in 0..nelx {
            for ely in 0..nely {
                let i = ely * nelx + elx;
                dc[i] = -penal * (E0 - EMIN) * x[i].powf(penal - 1.0) * energy(&u, elx, ely);
            }
        }
        // sensitivity filter
        let mut dcf = vec![0.0; n];
        for i1 in 0..nelx as isize {
            for j1 in 0..nely as isize {
                let (mut num, mut den) = (0.0, 0.0);
                for i2 in (i1 - reach).max(0)..=(i1 + reach).min(nelx as isize - 1) {
                    for j2 in (j1 - reach).max(0)..=(j1 + reach).min(nely as isize - 1) {
                        let d = (((i1 - i2).pow(2) + (j1 - j2).pow(2)) as f64).sqrt();
                        let h = (rmin - d).max(0.0);
                        let k = (j2 as usize) * nelx + i2 as usize;
                        num += h * x[k] * dc[k];
                        den += h;
                    }
                }
                let e = (j1 as usize) * nelx + i1 as usize;
                dcf[e] = num / (den * x[e].max(1e-3));
            }
        }
        // optimality criteria
        let (mut l1, mut l2, mv) = (0.0f64, 1e9f64, 0.2);
        let mut xnew = x.clone();
        while (l2 - l1) / (l1 + l2) > 1e-9 {
            let lmid = 0.5 * (l2 + l1);
            for i in 0..n {
                let b = x[i] * (-dcf[i] / lmid).sqrt();
                xnew[i] = b.min(x[i] + mv).min(1.0).max(x[i] - mv).max(0.0);
            }
            if xnew.iter().sum::<f64>() > volfrac * n as f64 {
                l1 = lmid;
            } else {
                l2 = lmid;
            }
        }
        let change = x
            .iter()
            .zip(&xnew)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = xnew;
        if change < 0.01 || iterations >= max_iter {
            break;
        }
    }
    let u = fe(nelx, nely, &x, penal, nu, fixed, f);
    let compliance = (0..nelx)
        .flat_map(|elx| (0..nely).map(move |ely| (elx, ely)))
        .map(|(elx, ely)| (EMIN + x[ely * nelx + elx].powf(penal) * (E0 - EMIN)) * energy(&u, elx, ely))
        .sum();
    Reference {
        x,
        compliance,
        iterations,
    }
}

/// Dofs of the left edge, fully fixed.
pub fn left_edge_dofs(nely: usize) -> Vec<usize> {
    (0..2 * (nely + 1)).collect()
}
