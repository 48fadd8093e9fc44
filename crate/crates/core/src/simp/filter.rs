use crate::model::{DensityField, Grid};

/// Lower bound on the density in the filter denominator.
pub const FILTER_DENSITY_FLOOR: f64 = 1e-3;

/// Radius-weighted sensitivity filter with weights `max(0, rmin - dist)`
/// between element centroids.
#[derive(Debug, Clone)]
pub struct SensitivityFilter {
    radius: f64,
    /// `(drow, dcol, weight)` for every offset with positive weight.
    stencil: Vec<(isize, isize, f64)>,
}

impl SensitivityFilter {
    pub fn new(radius: f64) -> Self {
        let reach = radius.ceil() as isize;
        let mut stencil = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let w = radius - ((dr * dr + dc * dc) as f64).sqrt();
                if w > 0.0 {
                    stencil.push((dr, dc, w));
                }
            }
        }
        Self { radius, stencil }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `sum_i w_i y_i dc_i / (max(y_e, 1e-3) sum_i w_i)`, neighbours clipped to
    /// the grid.
    pub fn apply(&self, dc: &Grid<f64>, density: &DensityField) -> Grid<f64> {
        let (rows, cols) = dc.shape();
        assert_eq!(density.shape(), (rows, cols), "filter inputs differ in shape");
        let y = density.values();
        Grid::from_fn(rows, cols, |r, c| {
            let (mut num, mut den) = (0.0, 0.0);
            for &(dr, dcol, w) in &self.stencil {
                let (rr, cc) = (r as isize + dr, c as isize + dcol);
                if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                    continue;
                }
                let cell = (rr as usize, cc as usize);
                num += w * y[cell] * dc[cell];
                den += w;
            }
            num / (y[(r, c)].max(FILTER_DENSITY_FLOOR) * den)
        })
    }
}

/// One-shot form of [`SensitivityFilter::apply`].
pub fn filter_sensitivity(dc: &Grid<f64>, density: &DensityField, rmin: f64) -> Grid<f64> {
    SensitivityFilter::new(rmin).apply(dc, density)
}
