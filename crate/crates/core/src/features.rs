//! Terrain descriptors on the BEV height field: PCA slope, roughness and
//! obstacle clearance.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::bev::{BevGrid, GridSpec};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::raster::Raster;
use crate::traversability::CompatibilityTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Half-width (cells) of the square slope window.
    pub k_slope: usize,
    /// Half-width (cells) of the square roughness window.
    pub k_rough: usize,
    pub min_neighbors: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k_slope: 2,
            k_rough: 5,
            min_neighbors: 3,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_slope < 1 || self.k_rough <= self.k_slope {
            return Err(Error::ConfigInvalid(format!(
                "need k_rough > k_slope >= 1 (got {}, {})",
                self.k_rough, self.k_slope
            )));
        }
        if self.min_neighbors < 3 {
            return Err(Error::ConfigInvalid("min_neighbors must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    /// Radians.
    pub slope: Raster<f64>,
    pub normals_z: Raster<f64>,
    /// Meters.
    pub roughness: Raster<f64>,
    /// Meters; `+∞` everywhere when there are no obstacles.
    pub clearance: Raster<f64>,
    pub obstacles: ObstacleSet,
}

/// Row-major indices of occupied cells.
pub type ObstacleSet = BTreeSet<usize>;

/// Eigenvalues of a symmetric 3x3 matrix, descending, by the trigonometric
/// closed form.
pub fn symmetric_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [largest, 3.0 * q - largest - smallest, smallest]
}

/// Unit eigenvector for eigenvalue `lambda` of a symmetric matrix, taken as
/// the largest cross product of two rows of `A − λI`.
fn eigenvector_for(a: &Matrix3<f64>, lambda: f64) -> Option<Vec3> {
    let m = a - Matrix3::identity() * lambda;
    let rows = [
        Vec3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)]),
        Vec3::new(m[(1, 0)], m[(1, 1)], m[(1, 2)]),
        Vec3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .into_iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let n = best.norm();
    (n > 0.0).then(|| best / n)
}

/// Normal of a point set: eigenvector of the smallest covariance eigenvalue,
/// oriented `n_z >= 0`. `None` when the smallest eigenvalue is not isolated.
pub fn pca_normal(points: &[Vec3]) -> Option<Vec3> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let cov = points
        .iter()
        .fold(Matrix3::zeros(), |acc, p| acc + (p - mean) * (p - mean).transpose())
        / n;
    let [l1, l2, l3] = symmetric_eigenvalues(&cov);
    if !(l1 > 0.0) || l2 - l3 <= 1e-9 * l1 {
        return None;
    }
    let mut v = eigenvector_for(&cov, l3)?;
    if v.z < 0.0 {
        v = -v;
    }
    Some(v)
}

fn window(spec: &GridSpec, row: usize, col: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    let (r0, r1) = (row.saturating_sub(k), (row + k).min(spec.nrows - 1));
    let (c0, c1) = (col.saturating_sub(k), (col + k).min(spec.ncols - 1));
    (r0..=r1).flat_map(move |r| (c0..=c1).map(move |c| (r, c)))
}

/// Slope (radians) and normal z-component per non-empty cell, from PCA over
/// cell points `(x_g, y_g, h̄)` in a `(2k+1)²` window.
pub fn slope_map(grid: &BevGrid, cfg: &FeatureConfig) -> Result<(Raster<f64>, Raster<f64>)> {
    cfg.validate()?;
    let spec = grid.spec;
    let mut slope = Raster::filled(spec, None);
    let mut normals_z = Raster::filled(spec, None);
    for row in 0..spec.nrows {
        for col in 0..spec.ncols {
            if grid.cell(row, col).is_empty() {
                continue;
            }
            let pts: Vec<Vec3> = window(&spec, row, col, cfg.k_slope)
                .filter_map(|(r, c)| {
                    let h = grid.cell(r, c).mean_height?;
                    let (x, y) = spec.center(r, c);
                    Some(Vec3::new(x, y, h))
                })
                .collect();
            if pts.len() < cfg.min_neighbors {
                continue;
            }
            if let Some(n) = pca_normal(&pts) {
                let nz = n.z.clamp(0.0, 1.0);
                normals_z.set(row, col, Some(nz));
                slope.set(row, col, Some(nz.acos()));
            }
        }
    }
    Ok((slope, normals_z))
}

/// Population standard deviation of `h̄` over a `(2k'+1)²` window.
pub fn roughness_map(grid: &BevGrid, cfg: &FeatureConfig) -> Result<Raster<f64>> {
    cfg.validate()?;
    let spec = grid.spec;
    let mut out = Raster::filled(spec, None);
    for row in 0..spec.nrows {
        for col in 0..spec.ncols {
            if grid.cell(row, col).is_empty() {
                continue;
            }
            let hs: Vec<f64> = window(&spec, row, col, cfg.k_rough)
                .filter_map(|(r, c)| grid.cell(r, c).mean_height)
                .collect();
            if hs.len() < cfg.min_neighbors {
                continue;
            }
            let n = hs.len() as f64;
            let mu = hs.iter().sum::<f64>() / n;
            let var = hs.iter().map(|h| (h - mu).powi(2)).sum::<f64>() / n;
            out.set(row, col, Some(var.sqrt()));
        }
    }
    Ok(out)
}

/// Non-empty cells whose class has zero compatibility or whose slope exceeds
/// `s_hard`.
pub fn derive_obstacles(
    grid: &BevGrid,
    slope: &Raster<f64>,
    tau: &CompatibilityTable,
    s_hard: f64,
) -> Result<ObstacleSet> {
    slope.ensure_same_grid(&grid.heights())?;
    let mut set = ObstacleSet::new();
    for (i, cell) in grid.cells.iter().enumerate() {
        let Some(class) = cell.dominant_class else {
            continue;
        };
        let steep = slope.cells[i].is_some_and(|s| s > s_hard);
        if tau.score(class) == 0.0 || steep {
            set.insert(i);
        }
    }
    Ok(set)
}

/// Exact squared distances (in cells) to the nearest obstacle, by separable
/// lower envelopes of parabolas. `None` when there are no obstacles.
pub fn squared_distance_transform(spec: &GridSpec, obstacles: &ObstacleSet) -> Option<Vec<i64>> {
    if obstacles.is_empty() {
        return None;
    }
    let (nrows, ncols) = (spec.nrows, spec.ncols);
    // Row pass: squared distance to the nearest obstacle in the same row.
    let mut row_sq: Vec<Option<i64>> = vec![None; nrows * ncols];
    for r in 0..nrows {
        let mut last: Option<usize> = None;
        for c in 0..ncols {
            if obstacles.contains(&(r * ncols + c)) {
                last = Some(c);
            }
            row_sq[r * ncols + c] = last.map(|l| (c - l) as i64);
        }
        let mut next: Option<usize> = None;
        for c in (0..ncols).rev() {
            if obstacles.contains(&(r * ncols + c)) {
                next = Some(c);
            }
            let i = r * ncols + c;
            let right = next.map(|n| (n - c) as i64);
            row_sq[i] = match (row_sq[i], right) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
    }
    for d in row_sq.iter_mut().flatten() {
        *d *= *d;
    }

    // Column pass over finite row distances.
    let mut out = vec![0i64; nrows * ncols];
    let mut sites: Vec<usize> = Vec::with_capacity(nrows);
    let mut bounds: Vec<f64> = Vec::with_capacity(nrows + 1);
    for c in 0..ncols {
        let f = |r: usize| row_sq[r * ncols + c];
        sites.clear();
        bounds.clear();
        for q in 0..nrows {
            let Some(fq) = f(q) else { continue };
            let mut s;
            loop {
                let Some(&v) = sites.last() else {
                    s = f64::NEG_INFINITY;
                    break;
                };
                let fv = f(v).expect("site has finite value");
                s = ((fq + (q * q) as i64) - (fv + (v * v) as i64)) as f64 / (2 * (q - v)) as f64;
                if s <= *bounds.last().expect("bound per site") {
                    sites.pop();
                    bounds.pop();
                } else {
                    break;
                }
            }
            sites.push(q);
            bounds.push(s);
        }
        let mut k = 0;
        for q in 0..nrows {
            while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
                k += 1;
            }
            let v = sites[k];
            let dv = q as i64 - v as i64;
            out[q * ncols + c] = dv * dv + f(v).expect("finite");
        }
    }
    Some(out)
}

/// Euclidean distance between cell centers to the nearest obstacle (meters).
pub fn clearance_map(spec: &GridSpec, obstacles: &ObstacleSet) -> Raster<f64> {
    match squared_distance_transform(spec, obstacles) {
        None => Raster::filled(*spec, Some(f64::INFINITY)),
        Some(sq) => Raster::from_cells(
            *spec,
            sq.into_iter()
                .map(|d| Some(spec.resolution * (d as f64).sqrt()))
                .collect(),
        ),
    }
}

/// Clearance with `+∞` replaced by `sentinel` for serialization.
pub fn clearance_for_export(clearance: &Raster<f64>, sentinel: f64) -> Raster<f64> {
    clearance.map(|v| if v.is_finite() { v } else { sentinel })
}

pub fn compute_features(
    grid: &BevGrid,
    cfg: &FeatureConfig,
    tau: &CompatibilityTable,
    s_hard: f64,
) -> Result<FeatureMaps> {
    let (slope, normals_z) = slope_map(grid, cfg)?;
    let roughness = roughness_map(grid, cfg)?;
    let obstacles = derive_obstacles(grid, &slope, tau, s_hard)?;
    let clearance = clearance_map(&grid.spec, &obstacles);
    Ok(FeatureMaps {
        slope,
        normals_z,
        roughness,
        clearance,
        obstacles,
    })
}
