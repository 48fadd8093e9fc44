use std::path::Path;

use super::topo1::write_atomic;
use super::DatasetError;
use crate::model::Grid;

/// Binary 8-bit PGM (`P5`) of a grid. Values map linearly from `range` (or
/// the grid's own min..max) to 0..255, clamped; `invert` maps high values to
/// black, which draws densities as dark material on white.
pub fn to_pgm(values: &Grid<f32>, range: Option<(f32, f32)>, invert: bool) -> Vec<u8> {
    let (rows, cols) = values.shape();
    let (lo, hi) = range.unwrap_or_else(|| {
        values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    });
    let span = hi - lo;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(rows * cols);
    for &v in values.iter() {
        let t = if span > 0.0 && span.is_finite() {
            ((v - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let t = if invert { 1.0 - t } else { t };
        out.push((t * 255.0).round() as u8);
    }
    out
}

pub fn write_pgm(
    values: &Grid<f32>,
    path: &Path,
    range: Option<(f32, f32)>,
    invert: bool,
) -> Result<(), DatasetError> {
    write_atomic(path, &to_pgm(values, range, invert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_scaling() {
        let g = Grid::from_vec(2, 3, vec![0.0, 0.5, 1.0, 1.0, 0.25, 0.0]).unwrap();
        let out = to_pgm(&g, Some((0.0, 1.0)), false);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&out[..header.len()], header);
        assert_eq!(&out[header.len()..], &[0, 128, 255, 255, 64, 0]);
        let inv = to_pgm(&g, Some((0.0, 1.0)), true);
        assert_eq!(&inv[header.len()..], &[255, 128, 0, 0, 191, 255]);
    }

    #[test]
    fn constant_grid_is_black() {
        let g = Grid::filled(2, 2, 0.4f32);
        let out = to_pgm(&g, None, false);
        assert!(out.ends_with(&[0, 0, 0, 0]));
    }
}
