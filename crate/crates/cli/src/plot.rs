//! Static PNG output: field heatmaps and log-scale line charts.

use crate::{CliError, CliResult};
use image::{Rgb, RgbImage};
use mfg_core::field::Trajectory;
use std::path::Path;

const PALETTE: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];
const SCALE: u32 = 4;

fn colour(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let w = x - i as f64;
    let mix = |c: usize| ((1.0 - w) * PALETTE[i][c] as f64 + w * PALETTE[i + 1][c] as f64).round() as u8;
    Rgb([mix(0), mix(1), mix(2)])
}

fn save(img: &RgbImage, path: &Path) -> CliResult<()> {
    img.save(path).map_err(|e| CliError::io(path, e))
}

/// Heatmap of a `rows × cols` row-major array, row 0 at the top.
pub fn heatmap(values: &[f64], rows: usize, cols: usize, path: &Path) -> CliResult<()> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = RgbImage::from_fn(cols as u32 * SCALE, rows as u32 * SCALE, |x, y| {
        let v = values[(y / SCALE) as usize * cols + (x / SCALE) as usize];
        colour((v - lo) / span)
    });
    save(&img, path)
}

/// Snapshot of the frame at `k` for `d = 2`, or the whole space-time history
/// (time downwards) for `d = 1`.
pub fn trajectory_image(traj: &Trajectory<f64>, k: usize, path: &Path) -> CliResult<()> {
    let g = traj.grid();
    match g.dim() {
        1 => {
            let vals: Vec<f64> = traj.frames().iter().flat_map(|f| f.values().iter().copied()).collect();
            heatmap(&vals, traj.len(), g.n(), path)
        }
        2 => heatmap(traj.frame(k).values(), g.n(), g.n(), path),
        d => Err(CliError::Format(format!("no image layout for d = {d}"))),
    }
}

/// Line chart of `log10 |y|` against the index.
pub fn log_series(ys: &[f64], path: &Path) -> CliResult<()> {
    let (w, h) = (480u32, 320u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let logs: Vec<f64> = ys.iter().map(|y| y.abs().max(1e-300).log10()).collect();
    if logs.len() >= 2 {
        let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let pt = |i: usize| {
            let x = 10.0 + (w - 20) as f64 * i as f64 / (logs.len() - 1) as f64;
            let y = 10.0 + (h - 20) as f64 * (hi - logs[i]) / span;
            (x, y)
        };
        for i in 1..logs.len() {
            let ((x0, y0), (x1, y1)) = (pt(i - 1), pt(i));
            let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for s in 0..=n {
                let t = s as f64 / n as f64;
                let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
                img.put_pixel(x.round() as u32, y.round() as u32, Rgb([200, 30, 30]));
            }
        }
    }
    save(&img, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_endpoints() {
        assert_eq!(colour(0.0), Rgb(PALETTE[0]));
        assert_eq!(colour(1.0), Rgb(PALETTE[4]));
        assert_eq!(colour(f64::NAN), Rgb(PALETTE[0]));
    }

    #[test]
    fn writes_png_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        heatmap(&[0.0, 1.0, 2.0, 3.0], 2, 2, &p).unwrap();
        let img = image::open(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2 * SCALE, 2 * SCALE));
        log_series(&[1.0, 0.1, 0.01, 1e-3], &dir.path().join("r.png")).unwrap();
    }
}
