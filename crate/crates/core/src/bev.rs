//! Bird's-eye-view grid: binning of the metric cloud and per-cell aggregates
//! (mean height, majority class, mean confidence).

use std::collections::BTreeMap;

use crate::cloud::{LabeledPointCloud, UNLABELED};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const DEFAULT_RESOLUTION: f64 = 0.25;

/// Axis-aligned grid; row 0 is the southernmost row, col 0 the westernmost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Lower-left corner.
    pub origin_x: f64,
    pub origin_y: f64,
    pub resolution: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, resolution: f64, ncols: usize, nrows: usize) -> Result<Self> {
        let spec = Self {
            origin_x,
            origin_y,
            resolution,
            ncols,
            nrows,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "resolution {} must be positive",
                self.resolution
            )));
        }
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::ConfigInvalid("grid must have at least one cell".into()));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err(Error::ConfigInvalid("non-finite grid origin".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.ncols, index % self.ncols)
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.nrows && (col as usize) < self.ncols
    }

    pub fn check(&self, row: i64, col: i64) -> Result<(usize, usize)> {
        if self.contains(row, col) {
            Ok((row as usize, col as usize))
        } else {
            Err(Error::OutOfBounds {
                row,
                col,
                nrows: self.nrows,
                ncols: self.ncols,
            })
        }
    }

    /// Unbounded cell indices `(row, col)` of a point.
    pub fn locate(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((y - self.origin_y) / self.resolution).floor() as i64,
            ((x - self.origin_x) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (r, c) = self.locate(x, y);
        self.contains(r, c).then_some((r as usize, c as usize))
    }

    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.resolution,
            self.origin_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_center(&self, row: i64, col: i64) -> Result<(f64, f64)> {
        let (r, c) = self.check(row, col)?;
        Ok(self.center(r, c))
    }
}

/// Bounding box of the cloud's xy extent, padded, snapped outward to whole
/// cells. The origin is floored onto the `resolution` lattice.
pub fn auto_spec(cloud: &LabeledPointCloud, resolution: f64, padding: f64) -> Result<GridSpec> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(padding >= 0.0) {
        return Err(Error::ConfigInvalid(format!("padding {padding} must be >= 0")));
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &cloud.points {
        min_x = min_x.min(p.position.x);
        min_y = min_y.min(p.position.y);
        max_x = max_x.max(p.position.x);
        max_y = max_y.max(p.position.y);
    }
    let snap = |lo: f64, hi: f64| {
        let origin = ((lo - padding) / resolution).floor() * resolution;
        let n = ((hi + padding - origin) / resolution).floor() as usize + 1;
        (origin, n)
    };
    let (origin_x, ncols) = snap(min_x, max_x);
    let (origin_y, nrows) = snap(min_y, max_y);
    GridSpec::new(origin_x, origin_y, resolution, ncols, nrows)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BevCell {
    pub count: usize,
    pub mean_height: Option<f64>,
    pub dominant_class: Option<u32>,
    pub mean_conf: Option<f64>,
}

impl BevCell {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub spec: GridSpec,
    /// Row-major, `spec.nrows × spec.ncols`.
    pub cells: Vec<BevCell>,
    /// Points that fell outside the grid.
    pub dropped: usize,
}

impl BevGrid {
    pub fn cell(&self, row: usize, col: usize) -> &BevCell {
        &self.cells[self.spec.index(row, col)]
    }

    pub fn heights(&self) -> Raster<f64> {
        Raster::from_cells(self.spec, self.cells.iter().map(|c| c.mean_height).collect())
    }

    pub fn classes(&self) -> Raster<u32> {
        Raster::from_cells(self.spec, self.cells.iter().map(|c| c.dominant_class).collect())
    }

    pub fn confidence(&self) -> Raster<f64> {
        Raster::from_cells(self.spec, self.cells.iter().map(|c| c.mean_conf).collect())
    }

    pub fn counts(&self) -> Raster<u32> {
        Raster::from_cells(self.spec, self.cells.iter().map(|c| Some(c.count as u32)).collect())
    }
}

/// Sum of values sorted ascending, so the result does not depend on input order.
fn ordered_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Bins points by `floor((x − origin) / resolution)` and aggregates each cell.
/// The majority vote ignores [`UNLABELED`] points unless no other class is
/// present; ties go to the lowest class id.
pub fn build_bev(cloud: &LabeledPointCloud, spec: &GridSpec) -> Result<BevGrid> {
    spec.validate()?;
    let mut heights: Vec<Vec<f64>> = vec![Vec::new(); spec.len()];
    let mut confs: Vec<Vec<f64>> = vec![Vec::new(); spec.len()];
    let mut votes: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); spec.len()];
    let mut dropped = 0;
    for p in &cloud.points {
        match spec.cell_of(p.position.x, p.position.y) {
            Some((r, c)) => {
                let i = spec.index(r, c);
                heights[i].push(p.position.z);
                confs[i].push(p.confidence);
                *votes[i].entry(p.class_id).or_default() += 1;
            }
            None => dropped += 1,
        }
    }
    let cells = (0..spec.len())
        .map(|i| {
            let count = heights[i].len();
            if count == 0 {
                return BevCell::default();
            }
            let labeled = votes[i].iter().filter(|(&c, _)| c != UNLABELED);
            let pick = |it: &mut dyn Iterator<Item = (&u32, &usize)>| {
                // BTreeMap iterates ascending, so `>` keeps the lowest id on ties.
                let mut best: Option<(u32, usize)> = None;
                for (&c, &n) in it {
                    if best.is_none_or(|(_, bn)| n > bn) {
                        best = Some((c, n));
                    }
                }
                best.map(|(c, _)| c)
            };
            let dominant = pick(&mut labeled.into_iter()).or(Some(UNLABELED));
            BevCell {
                count,
                mean_height: Some(ordered_mean(&mut heights[i])),
                dominant_class: dominant,
                mean_conf: Some(ordered_mean(&mut confs[i])),
            }
        })
        .collect();
    Ok(BevGrid {
        spec: *spec,
        cells,
        dropped,
    })
}
