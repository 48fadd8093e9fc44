use super::{SimpConfig, SimpError};
use crate::model::{DensityField, Grid};

const MAX_BISECTIONS: usize = 400;
const MAX_BRACKET_STEPS: usize = 64;

/// Optimality-criteria step
/// `y_new = clamp(y (-dc / lambda)^eta, y - move, y + move, 0, 1)` with
/// `lambda` bisected (in log space) until `|mean(y_new) - vf_target|` is
/// within the configured tolerance.
pub fn oc_update(
    density: &DensityField,
    dc: &Grid<f64>,
    vf_target: f64,
    config: &SimpConfig,
) -> Result<DensityField, SimpError> {
    let y = density.values();
    assert_eq!(y.shape(), dc.shape(), "oc inputs differ in shape");
    let tol = config.vf_bisect_tol;
    let mv = config.move_limit;
    let eta = config.oc_damping;
    let (rows, cols) = y.shape();
    let n = y.len() as f64;
    let mut buf = vec![0.0; y.len()];
    let update = |lambda: f64, buf: &mut Vec<f64>| -> f64 {
        let mut sum = 0.0;
        for ((out, &yi), &di) in buf.iter_mut().zip(y.iter()).zip(dc.iter()) {
            // positive dc is treated as zero: the element would add compliance
            let ratio = (-di).max(0.0) / lambda;
            let candidate = yi * ratio.powf(eta);
            let lo = (yi - mv).max(0.0);
            let hi = (yi + mv).min(1.0);
            *out = candidate.clamp(lo, hi);
            sum += *out;
        }
        sum / n
    };

    // mean(y_new) is non-increasing in lambda
    let scale = dc.iter().fold(0.0f64, |m, &d| m.max(-d));
    if !(scale.is_finite() && scale > 0.0) {
        return Err(SimpError::BisectionFailure {
            reason: "sensitivities are all zero or not finite".into(),
        });
    }
    let (mut lo, mut hi) = (scale * 1e-3, scale * 1e3);
    let mut steps = 0;
    while update(lo, &mut buf) < vf_target - tol {
        lo *= 1e-3;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(SimpError::BisectionFailure {
                reason: format!("volume fraction {vf_target} unreachable from above"),
            });
        }
    }
    steps = 0;
    while update(hi, &mut buf) > vf_target + tol {
        hi *= 1e3;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(SimpError::BisectionFailure {
                reason: format!("volume fraction {vf_target} unreachable from below"),
            });
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let vf = update(mid, &mut buf);
        if (vf - vf_target).abs() <= tol {
            let values = Grid::from_vec(rows, cols, buf).expect("buffer matches grid");
            return Ok(DensityField::new_unchecked(values));
        }
        if vf > vf_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi <= lo * (1.0 + 4.0 * f64::EPSILON) {
            break;
        }
    }
    Err(SimpError::BisectionFailure {
        reason: format!("bisection stalled before reaching volume fraction {vf_target}"),
    })
}
