//! Grayscale rendering of grids as binary PGM.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

pub const DEFAULT_CLIP_PERCENTILE: f64 = 98.0;

/// Nearest-rank percentile of `|values|`.
pub fn clip_value(values: &[f64], percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::invalid(format!(
            "clip percentile must be in (0, 100], got {percentile}"
        )));
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * mags.len() as f64).ceil() as usize;
    Ok(mags[rank.clamp(1, mags.len()) - 1])
}

/// `P5` image, `n2` pixels wide and `n1` tall; `[−c, c]` maps linearly onto `[0, 255]`.
pub fn render_pgm(grid: &Grid2D, clip_percentile: f64) -> Result<Vec<u8>> {
    let clip = clip_value(&grid.values, clip_percentile)?;
    let header = format!("P5\n{} {}\n255\n", grid.n2, grid.n1);
    let mut out = Vec::with_capacity(header.len() + grid.len());
    out.extend_from_slice(header.as_bytes());
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            let v = grid.get(i1, i2);
            let level = if clip > 0.0 {
                ((v / clip).clamp(-1.0, 1.0) + 1.0) * 127.5
            } else {
                127.5
            };
            out.push(level.round() as u8);
        }
    }
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, grid: &Grid2D, clip_percentile: f64) -> Result<()> {
    std::fs::write(path, render_pgm(grid, clip_percentile)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixels(bytes: &[u8]) -> &[u8] {
        let mut newlines = 0;
        let start = bytes
            .iter()
            .position(|&b| {
                newlines += (b == b'\n') as usize;
                newlines == 3
            })
            .unwrap();
        &bytes[start + 1..]
    }

    #[test]
    fn zero_grid_is_mid_gray() {
        let g = Grid2D::filled(3, 4, 1.0, 1.0, 0.0).unwrap();
        let img = render_pgm(&g, 98.0).unwrap();
        assert!(img.starts_with(b"P5\n4 3\n255\n"));
        assert!(pixels(&img).iter().all(|&p| p == 128));
    }

    #[test]
    fn constant_positive_is_white() {
        let g = Grid2D::filled(5, 2, 1.0, 1.0, 0.37).unwrap();
        let img = render_pgm(&g, 98.0).unwrap();
        assert_eq!(pixels(&img).len(), 10);
        assert!(pixels(&img).iter().all(|&p| p == 255));
    }

    #[test]
    fn rows_are_fast_axis_samples() {
        // n1 = 2 rows, n2 = 3 columns, values column by column.
        let g = Grid2D::new(2, 3, 1.0, 1.0, vec![-1.0, 1.0, 0.0, 0.5, 1.0, -0.5]).unwrap();
        let img = render_pgm(&g, 100.0).unwrap();
        assert_eq!(pixels(&img), &[0, 128, 255, 255, 191, 64]);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(clip_value(&v, 98.0).unwrap(), 98.0);
        assert_eq!(clip_value(&v, 100.0).unwrap(), 100.0);
        assert!(clip_value(&v, 0.0).is_err());
    }
}
