//! Red-to-green heatmaps as binary PPM (P6).

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::raster::Raster;

pub const NODATA_RGB: [u8; 3] = [128, 128, 128];

fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// `0 → (255,0,0)`, `1 → (0,255,0)`; values are clamped to `[0, 1]`.
/// Green is `255 − red` so each pixel sums to 255.
pub fn heat_color(v: f64) -> [u8; 3] {
    let red = round_half_up(255.0 * (1.0 - v.clamp(0.0, 1.0)));
    [red, 255 - red, 0]
}

/// Image rows top to bottom follow the northernmost grid row first, the
/// same order as the ESRI ASCII export.
pub fn heatmap_ppm(raster: &Raster<f64>) -> Vec<u8> {
    let s = &raster.spec;
    let mut out = format!("P6\n{} {}\n255\n", s.ncols, s.nrows).into_bytes();
    for row in (0..s.nrows).rev() {
        for col in 0..s.ncols {
            let px = match raster.get(row, col) {
                Some(v) if v.is_finite() => heat_color(v),
                _ => NODATA_RGB,
            };
            out.extend_from_slice(&px);
        }
    }
    out
}

pub fn render_heatmap(raster: &Raster<f64>, out_path: &Path) -> Result<()> {
    fs::write(out_path, heatmap_ppm(raster))?;
    Ok(())
}
