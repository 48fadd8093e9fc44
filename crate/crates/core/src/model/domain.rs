use serde::{Deserialize, Serialize};

use super::{Grid, ModelError};

/// Rectangular grid of square plane-stress elements.
///
/// Nodes are numbered column by column starting at the top-left corner:
/// node `(ix, iy)` has index `ix * (nely + 1) + iy`, where `iy = 0` is the top
/// row. Each node carries two displacement unknowns, `2n` (x) and `2n + 1` (y,
/// positive upward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDomain {
    pub nelx: usize,
    pub nely: usize,
    pub element_size: f64,
    pub thickness: f64,
    pub youngs_modulus: f64,
    pub youngs_min: f64,
    pub poisson: f64,
}

impl Default for DesignDomain {
    fn default() -> Self {
        Self {
            nelx: 128,
            nely: 64,
            element_size: 1.0,
            thickness: 1.0,
            youngs_modulus: 1.0,
            youngs_min: 1e-9,
            poisson: 0.3,
        }
    }
}

impl DesignDomain {
    /// Default material constants on an `nely x nelx` grid.
    pub fn with_size(nelx: usize, nely: usize) -> Self {
        Self {
            nelx,
            nely,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidDomain(msg.to_string()));
        if self.nelx == 0 || self.nely == 0 {
            return bad("grid must have at least one element in each direction");
        }
        if self.nelx > u16::MAX as usize || self.nely > u16::MAX as usize {
            return bad("grid dimensions must fit in 16 bits");
        }
        if !(self.element_size > 0.0 && self.element_size.is_finite()) {
            return bad("element size must be positive");
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return bad("thickness must be positive");
        }
        if !(self.youngs_modulus.is_finite() && self.youngs_min > 0.0)
            || self.youngs_min >= self.youngs_modulus
        {
            return bad("moduli must satisfy 0 < Emin < E");
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return bad("Poisson ratio must lie in [0, 0.5)");
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn node_rows(&self) -> usize {
        self.nely + 1
    }

    pub fn node_count(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix <= self.nelx && iy <= self.nely);
        ix * (self.nely + 1) + iy
    }

    /// Inverse of [`node_index`](Self::node_index): `(ix, iy)`.
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node / (self.nely + 1), node % (self.nely + 1))
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        if node >= self.node_count() {
            return false;
        }
        let (ix, iy) = self.node_coords(node);
        ix == 0 || ix == self.nelx || iy == 0 || iy == self.nely
    }

    /// All boundary nodes in increasing index order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| self.is_boundary_node(n))
            .collect()
    }

    /// Nodes of element `(row, col)` in counter-clockwise order starting at
    /// the bottom-left corner.
    pub fn element_nodes(&self, row: usize, col: usize) -> [usize; 4] {
        let top_left = self.node_index(col, row);
        let top_right = self.node_index(col + 1, row);
        [top_left + 1, top_right + 1, top_right, top_left]
    }

    pub fn element_dofs(&self, row: usize, col: usize) -> [usize; 8] {
        let n = self.element_nodes(row, col);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Elements (as `(row, col)`) touching a node.
    pub fn elements_around_node(&self, node: usize) -> Vec<(usize, usize)> {
        let (ix, iy) = self.node_coords(node);
        let mut out = Vec::with_capacity(4);
        for row in [iy.wrapping_sub(1), iy] {
            for col in [ix.wrapping_sub(1), ix] {
                if row < self.nely && col < self.nelx {
                    out.push((row, col));
                }
            }
        }
        out
    }

    /// SIMP stiffness interpolation `Emin + y^p (E - Emin)`.
    pub fn penalized_modulus(&self, density: f64, penal: f64) -> f64 {
        self.youngs_min + density.powf(penal) * (self.youngs_modulus - self.youngs_min)
    }
}

/// Element densities in `[0, 1]`, shaped `nely x nelx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField(Grid<f64>);

impl DensityField {
    pub fn new(values: Grid<f64>) -> Result<Self, ModelError> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteDensity { index: i });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::DensityOutOfRange { index: i, value: v });
            }
        }
        Ok(Self(values))
    }

    /// Wraps values without range checks. Callers must uphold the invariant.
    pub(crate) fn new_unchecked(values: Grid<f64>) -> Self {
        Self(values)
    }

    pub fn uniform(domain: &DesignDomain, value: f64) -> Result<Self, ModelError> {
        Self::new(Grid::filled(domain.nely, domain.nelx, value))
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_values(self) -> Grid<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn volume_fraction(&self) -> f64 {
        self.0.mean()
    }

    pub fn matches(&self, domain: &DesignDomain) -> bool {
        self.0.shape() == (domain.nely, domain.nelx)
    }

    /// Thresholds at 0.5 to a 0/1 design.
    pub fn binarized(&self) -> Self {
        Self(self.0.map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }))
    }
}
