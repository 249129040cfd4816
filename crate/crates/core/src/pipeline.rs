//! Cloud-to-raster mapping with every intermediate product kept.

use std::path::Path;

use crate::bev::{auto_spec, build_bev, BevGrid, GridSpec};
use crate::cloud::LabeledPointCloud;
use crate::config::RunConfig;
use crate::error::Result;
use crate::features::{clearance_for_export, compute_features, FeatureMaps};
use crate::raster::write_esri_ascii;
use crate::traversability::{compute_traversability, CompatibilityTable, ThresholdConfig, TraversabilityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct MapProducts {
    pub grid: BevGrid,
    pub features: FeatureMaps,
    pub trav: TraversabilityMap,
}

/// BEV grid, features and fused traversability for `cloud` on `spec`
/// (derived from the cloud extent when `None`).
pub fn map_cloud(cloud: &LabeledPointCloud, spec: Option<GridSpec>, cfg: &RunConfig) -> Result<MapProducts> {
    cfg.validate()?;
    let spec = match spec {
        Some(s) => s,
        None => auto_spec(cloud, cfg.resolution, cfg.padding)?,
    };
    let grid = build_bev(cloud, &spec)?;
    let features = compute_features(&grid, &cfg.features, &cfg.compatibility, cfg.thresholds.s_hard)?;
    let trav = compute_traversability(&grid, &features, &cfg.thresholds, &cfg.compatibility)?;
    Ok(MapProducts { grid, features, trav })
}

/// Semantics-blind variant: every class compatible, `α = 1`.
pub fn geometric_baseline(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        compatibility: CompatibilityTable::permissive(),
        thresholds: ThresholdConfig {
            alpha: 1.0,
            ..cfg.thresholds
        },
        ..cfg.clone()
    }
}

pub const MAP_FILES: [&str; 11] = [
    "height.asc",
    "class.asc",
    "confidence.asc",
    "count.asc",
    "slope.asc",
    "roughness.asc",
    "clearance.asc",
    "t_geo.asc",
    "t_sem.asc",
    "t.asc",
    "normals_z.asc",
];

impl MapProducts {
    /// Writes every raster in [`MAP_FILES`] into `dir`. Slope is written in
    /// degrees; unbounded clearance as `clearance_sentinel`.
    pub fn write(&self, dir: &Path, thresholds: &ThresholdConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = &self.features;
        write_esri_ascii(&dir.join("height.asc"), &self.grid.heights())?;
        write_esri_ascii(&dir.join("class.asc"), &self.grid.classes())?;
        write_esri_ascii(&dir.join("confidence.asc"), &self.grid.confidence())?;
        write_esri_ascii(&dir.join("count.asc"), &self.grid.counts())?;
        write_esri_ascii(&dir.join("slope.asc"), &f.slope.map(f64::to_degrees))?;
        write_esri_ascii(&dir.join("roughness.asc"), &f.roughness)?;
        write_esri_ascii(
            &dir.join("clearance.asc"),
            &clearance_for_export(&f.clearance, thresholds.clearance_sentinel()),
        )?;
        write_esri_ascii(&dir.join("t_geo.asc"), &self.trav.t_geo)?;
        write_esri_ascii(&dir.join("t_sem.asc"), &self.trav.t_sem)?;
        write_esri_ascii(&dir.join("t.asc"), &self.trav.t)?;
        write_esri_ascii(&dir.join("normals_z.asc"), &f.normals_z)?;
        Ok(())
    }
}
