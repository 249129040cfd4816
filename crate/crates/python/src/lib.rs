//! Python bindings for the aerodeploy pipeline.
//!
//! Points are passed as sequences of `(x, y, z)` tuples and rasters as
//! [`Raster`] objects holding `None` for no-data cells.

use std::path::PathBuf;

use aerodeploy::cloud::{LabeledPoint, LabeledPointCloud};
use aerodeploy::config::RunConfig;
use aerodeploy::deployment::{select_deployment as select_core, DeploymentCandidate};
use aerodeploy::geom::{PoseSE3, RotationSO3, Sim3Transform, Vec3};
use aerodeploy::grounding::{estimate_grounding, GroundingConfig};
use aerodeploy::lift::{extract_target as extract_core, TargetOptions};
use aerodeploy::pipeline::map_cloud as map_core;
use aerodeploy::raster::{read_esri_ascii, write_esri_ascii, Raster as CoreRaster};
use aerodeploy::synth::{synth_scene, SceneParams};
use aerodeploy::trajectory::{FrameId, StampedPose, Trajectory as CoreTrajectory};
use aerodeploy::{metrics, render, traversability, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pyaerodeploy, AerodeployError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => AerodeployError::new_err(format!("{}: {other}", other.name())),
    }
}

type Point = (f64, f64, f64);

fn vec3(p: Point) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

fn tuple(v: &Vec3) -> Point {
    (v.x, v.y, v.z)
}

fn frame_id(name: &str) -> PyResult<FrameId> {
    FrameId::parse(name).ok_or_else(|| AerodeployError::new_err(format!("Malformed: unknown frame '{name}'")))
}

fn run_config(path: Option<PathBuf>) -> PyResult<RunConfig> {
    match path {
        Some(p) => RunConfig::read(&p).map_err(to_py),
        None => Ok(RunConfig::default()),
    }
}

/// Similarity transform `x ↦ s·R·x + t`.
#[pyclass(module = "pyaerodeploy", frozen, from_py_object)]
#[derive(Clone)]
pub struct Sim3 {
    pub inner: Sim3Transform,
}

#[pymethods]
impl Sim3 {
    /// `quaternion` is `(x, y, z, w)`.
    #[new]
    #[pyo3(signature = (scale=1.0, quaternion=(0.0, 0.0, 0.0, 1.0), translation=(0.0, 0.0, 0.0)))]
    pub fn new(scale: f64, quaternion: (f64, f64, f64, f64), translation: Point) -> PyResult<Self> {
        let (x, y, z, w) = quaternion;
        let r = RotationSO3::from_quaternion(x, y, z, w).map_err(to_py)?;
        Ok(Self {
            inner: Sim3Transform::new(scale, r, vec3(translation)).map_err(to_py)?,
        })
    }

    #[getter]
    pub fn scale(&self) -> f64 {
        self.inner.scale()
    }

    #[getter]
    pub fn quaternion(&self) -> (f64, f64, f64, f64) {
        let q = self.inner.rotation.to_quaternion();
        (q[0], q[1], q[2], q[3])
    }

    #[getter]
    pub fn translation(&self) -> Point {
        tuple(&self.inner.translation)
    }

    #[getter]
    pub fn rotation_angle(&self) -> f64 {
        self.inner.rotation.angle()
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let r = self.inner.rotation.matrix() * self.inner.scale();
        let t = self.inner.translation;
        let mut rows: Vec<Vec<f64>> = (0..3).map(|i| vec![r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]]).collect();
        rows.push(vec![0.0, 0.0, 0.0, 1.0]);
        rows
    }

    pub fn apply(&self, points: Vec<Point>) -> Vec<Point> {
        points
            .into_iter()
            .map(|p| tuple(&self.inner.apply_point(&vec3(p))))
            .collect()
    }

    pub fn inverse(&self) -> Self {
        Self {
            inner: self.inner.inverse(),
        }
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &Sim3) -> Self {
        Self {
            inner: self.inner.compose(&first.inner),
        }
    }

    fn __repr__(&self) -> String {
        let t = self.inner.translation;
        format!(
            "Sim3(scale={}, angle={:.6} rad, translation=({}, {}, {}))",
            self.inner.scale(),
            self.inner.rotation.angle(),
            t.x,
            t.y,
            t.z
        )
    }
}

#[pyclass(module = "pyaerodeploy", frozen, from_py_object)]
#[derive(Clone)]
pub struct Trajectory {
    pub inner: CoreTrajectory,
}

#[pymethods]
impl Trajectory {
    /// Poses with identity orientation at `dt` spacing.
    #[staticmethod]
    #[pyo3(signature = (positions, dt=1.0, frame="metric"))]
    pub fn from_positions(positions: Vec<Point>, dt: f64, frame: &str) -> PyResult<Self> {
        let p: Vec<Vec3> = positions.into_iter().map(vec3).collect();
        Ok(Self {
            inner: CoreTrajectory::from_positions(frame_id(frame)?, &p, dt).map_err(to_py)?,
        })
    }

    /// Quaternions are `(x, y, z, w)`.
    #[staticmethod]
    #[pyo3(signature = (timestamps, positions, quaternions, frame="metric"))]
    pub fn from_poses(
        timestamps: Vec<f64>,
        positions: Vec<Point>,
        quaternions: Vec<(f64, f64, f64, f64)>,
        frame: &str,
    ) -> PyResult<Self> {
        if timestamps.len() != positions.len() || positions.len() != quaternions.len() {
            return Err(to_py(Error::LengthMismatch(timestamps.len(), positions.len())));
        }
        let poses = timestamps
            .into_iter()
            .zip(positions)
            .zip(quaternions)
            .map(|((timestamp, p), (x, y, z, w))| {
                let r = RotationSO3::from_quaternion(x, y, z, w)?;
                Ok(StampedPose {
                    timestamp,
                    pose: PoseSE3::new(r, vec3(p)),
                })
            })
            .collect::<aerodeploy::Result<Vec<_>>>()
            .map_err(to_py)?;
        Ok(Self {
            inner: CoreTrajectory::new(frame_id(frame)?, poses).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, frame="metric"))]
    pub fn read(path: PathBuf, frame: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreTrajectory::read(&path, frame_id(frame)?).map_err(to_py)?,
        })
    }

    pub fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(to_py)
    }

    #[getter]
    pub fn frame(&self) -> &'static str {
        self.inner.frame().as_str()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.inner.positions().iter().map(tuple).collect()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.inner.timestamps()
    }

    pub fn transformed(&self, t: &Sim3, frame: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.transformed(&t.inner, frame_id(frame)?),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(module = "pyaerodeploy", frozen, from_py_object)]
#[derive(Clone)]
pub struct PointCloud {
    pub inner: LabeledPointCloud,
}

#[pymethods]
impl PointCloud {
    /// Classes default to 0, confidences to 1.
    #[new]
    #[pyo3(signature = (points, classes=None, confidences=None, frame="metric"))]
    pub fn new(
        points: Vec<Point>,
        classes: Option<Vec<u32>>,
        confidences: Option<Vec<f64>>,
        frame: &str,
    ) -> PyResult<Self> {
        let n = points.len();
        let classes = classes.unwrap_or_else(|| vec![0; n]);
        let confidences = confidences.unwrap_or_else(|| vec![1.0; n]);
        if classes.len() != n {
            return Err(to_py(Error::LengthMismatch(n, classes.len())));
        }
        if confidences.len() != n {
            return Err(to_py(Error::LengthMismatch(n, confidences.len())));
        }
        let pts = points
            .into_iter()
            .zip(classes)
            .zip(confidences)
            .map(|((p, c), w)| LabeledPoint::new(vec3(p), c, w))
            .collect();
        Ok(Self {
            inner: LabeledPointCloud::new(frame_id(frame)?, pts).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, frame="metric"))]
    pub fn read(path: PathBuf, frame: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LabeledPointCloud::read(&path, frame_id(frame)?).map_err(to_py)?,
        })
    }

    pub fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(to_py)
    }

    #[getter]
    pub fn frame(&self) -> &'static str {
        self.inner.frame.as_str()
    }

    pub fn points(&self) -> Vec<Point> {
        self.inner.points.iter().map(|p| tuple(&p.position)).collect()
    }

    pub fn classes(&self) -> Vec<u32> {
        self.inner.points.iter().map(|p| p.class_id).collect()
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.confidence).collect()
    }

    pub fn transformed(&self, t: &Sim3, frame: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.transformed(&t.inner, frame_id(frame)?),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Row 0 is the southernmost row.
#[pyclass(module = "pyaerodeploy", frozen, from_py_object)]
#[derive(Clone)]
pub struct Raster {
    pub inner: CoreRaster<f64>,
}

#[pymethods]
impl Raster {
    #[staticmethod]
    pub fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_esri_ascii(&path).map_err(to_py)?,
        })
    }

    pub fn write(&self, path: PathBuf) -> PyResult<()> {
        write_esri_ascii(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    pub fn nrows(&self) -> usize {
        self.inner.spec.nrows
    }

    #[getter]
    pub fn ncols(&self) -> usize {
        self.inner.spec.ncols
    }

    #[getter]
    pub fn resolution(&self) -> f64 {
        self.inner.spec.resolution
    }

    #[getter]
    pub fn origin(&self) -> (f64, f64) {
        (self.inner.spec.origin_x, self.inner.spec.origin_y)
    }

    pub fn get(&self, row: usize, col: usize) -> PyResult<Option<f64>> {
        let s = &self.inner.spec;
        s.check(row as i64, col as i64).map_err(to_py)?;
        Ok(self.inner.get(row, col))
    }

    /// Rows of values, `None` for no-data.
    pub fn to_list(&self) -> Vec<Vec<Option<f64>>> {
        let s = &self.inner.spec;
        (0..s.nrows)
            .map(|r| (0..s.ncols).map(|c| self.inner.get(r, c)).collect())
            .collect()
    }

    /// Binary PPM heatmap, red at 0 and green at 1.
    pub fn render(&self, path: PathBuf) -> PyResult<()> {
        render::render_heatmap(&self.inner, &path).map_err(to_py)
    }
}

fn raster(inner: CoreRaster<f64>) -> Raster {
    Raster { inner }
}

#[pyclass(module = "pyaerodeploy", frozen)]
pub struct Grounding {
    #[pyo3(get)]
    pub transform: Sim3,
    #[pyo3(get)]
    pub residual: f64,
    #[pyo3(get)]
    pub n_pairs: usize,
    #[pyo3(get)]
    pub collinear: bool,
}

/// Reconstruction → metric transform from paired trajectories.
#[pyfunction]
#[pyo3(signature = (traj_v, traj_p, strides=None))]
pub fn ground(traj_v: &Trajectory, traj_p: &Trajectory, strides: Option<Vec<usize>>) -> PyResult<Grounding> {
    let mut cfg = GroundingConfig::default();
    if let Some(s) = strides {
        cfg.strides = s;
    }
    let g = estimate_grounding(&traj_v.inner, &traj_p.inner, &cfg).map_err(to_py)?;
    Ok(Grounding {
        transform: Sim3 { inner: g.transform },
        residual: g.fit.residual,
        n_pairs: g.fit.n_pairs,
        collinear: g.fit.collinear,
    })
}

/// Similarity mapping `est` onto `gt`.
#[pyfunction]
pub fn umeyama_align(gt: &Trajectory, est: &Trajectory) -> PyResult<Sim3> {
    Ok(Sim3 {
        inner: metrics::umeyama_align(&gt.inner, &est.inner).map_err(to_py)?,
    })
}

#[pyfunction]
pub fn ate(gt: &Trajectory, est: &Trajectory) -> PyResult<f64> {
    metrics::ate(&gt.inner, &est.inner).map_err(to_py)
}

/// `(translation_rmse, rotation_rmse_radians)`.
#[pyfunction]
#[pyo3(signature = (gt, est, delta=1))]
pub fn rpe(gt: &Trajectory, est: &Trajectory, delta: usize) -> PyResult<(f64, f64)> {
    metrics::rpe(&gt.inner, &est.inner, delta).map_err(to_py)
}

/// Representative point of a class: `(x, y, z), confidence, method`.
#[pyfunction]
pub fn extract_target(cloud: &PointCloud, class_id: u32) -> PyResult<(Point, f64, &'static str)> {
    let t = extract_core(&cloud.inner, class_id, &TargetOptions::default()).map_err(to_py)?;
    Ok((tuple(&t.representative), t.confidence, t.method.as_str()))
}

/// Builds every map layer. Returns a dict of rasters keyed `t`, `t_geo`,
/// `t_sem`, `height`, `confidence`, `slope` (radians), `roughness`,
/// `clearance` (`inf` with no obstacles), `normals_z`.
#[pyfunction]
#[pyo3(signature = (cloud, grid=None, config=None))]
pub fn map_cloud<'py>(
    py: Python<'py>,
    cloud: &PointCloud,
    grid: Option<&Raster>,
    config: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = run_config(config)?;
    let m = map_core(&cloud.inner, grid.map(|g| g.inner.spec), &cfg).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", raster(m.trav.t))?;
    out.set_item("t_geo", raster(m.trav.t_geo))?;
    out.set_item("t_sem", raster(m.trav.t_sem))?;
    out.set_item("height", raster(m.grid.heights()))?;
    out.set_item("confidence", raster(m.grid.confidence()))?;
    out.set_item("slope", raster(m.features.slope))?;
    out.set_item("roughness", raster(m.features.roughness))?;
    out.set_item("clearance", raster(m.features.clearance))?;
    out.set_item("normals_z", raster(m.features.normals_z))?;
    Ok(out)
}

fn zone_dict<'py>(py: Python<'py>, rank: usize, z: &DeploymentCandidate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rank", rank)?;
    d.set_item("row", z.row)?;
    d.set_item("col", z.col)?;
    d.set_item("x", z.x)?;
    d.set_item("y", z.y)?;
    d.set_item("T", z.score_t)?;
    d.set_item("goal_distance", z.goal_distance)?;
    d.set_item("objective", z.objective)?;
    d.set_item("reachable", z.reachable)?;
    Ok(d)
}

/// Ranked deployment zones around `goal`. Keyword overrides replace the
/// values from `config` (or the defaults).
#[pyfunction]
#[pyo3(signature = (t, goal, config=None, t_th=None, r_max=None, lambda_=None, k=None, min_separation=None))]
#[allow(clippy::too_many_arguments)]
pub fn select_deployment<'py>(
    py: Python<'py>,
    t: &Raster,
    goal: (f64, f64),
    config: Option<PathBuf>,
    t_th: Option<f64>,
    r_max: Option<f64>,
    lambda_: Option<f64>,
    k: Option<usize>,
    min_separation: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = run_config(config)?.deployment;
    cfg.t_th = t_th.unwrap_or(cfg.t_th);
    cfg.r_max = r_max.unwrap_or(cfg.r_max);
    cfg.lambda = lambda_.unwrap_or(cfg.lambda);
    cfg.k = k.unwrap_or(cfg.k);
    cfg.min_separation = min_separation.unwrap_or(cfg.min_separation);
    let zones = select_core(&t.inner, goal, &cfg).map_err(to_py)?;
    zones.iter().enumerate().map(|(i, z)| zone_dict(py, i + 1, z)).collect()
}

/// Mann-Whitney ROC AUC; ties count one half.
#[pyfunction]
pub fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    traversability::roc_auc(&scores, &labels).map_err(to_py)
}

/// Scores `pred` against a 0/1 ground-truth raster on the same grid.
#[pyfunction]
pub fn evaluate_traversability<'py>(py: Python<'py>, pred: &Raster, gt: &Raster) -> PyResult<Bound<'py, PyDict>> {
    let r = traversability::evaluate(&pred.inner, &gt.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("macc", r.macc)?;
    d.set_item("aacc", r.aacc)?;
    d.set_item("roc_auc", r.roc_auc)?;
    d.set_item("mse", r.mse)?;
    d.set_item("n_cells", r.n_cells)?;
    Ok(d)
}

#[pyclass(module = "pyaerodeploy", frozen)]
pub struct Scene {
    #[pyo3(get)]
    pub name: String,
    #[pyo3(get)]
    pub seed: u64,
    /// Reconstruction frame.
    #[pyo3(get)]
    pub cloud: PointCloud,
    #[pyo3(get)]
    pub traj_v: Trajectory,
    #[pyo3(get)]
    pub traj_p: Trajectory,
    #[pyo3(get)]
    pub gt_sim3: Sim3,
    #[pyo3(get)]
    pub gt_trav: Raster,
    #[pyo3(get)]
    pub gt_slope: Raster,
    #[pyo3(get)]
    pub goal: (f64, f64),
}

/// Deterministic synthetic scene. `density` is points per square meter.
#[pyfunction]
#[pyo3(signature = (name, seed=0, density=None))]
pub fn synth(name: &str, seed: u64, density: Option<f64>) -> PyResult<Scene> {
    let mut params = SceneParams::default();
    if let Some(d) = density {
        params.density = d;
    }
    let b = synth_scene(name, seed, &params).map_err(to_py)?;
    Ok(Scene {
        name: b.name,
        seed: b.seed,
        cloud: PointCloud { inner: b.cloud },
        traj_v: Trajectory { inner: b.traj_v },
        traj_p: Trajectory { inner: b.traj_p },
        gt_sim3: Sim3 { inner: b.gt_sim3 },
        gt_trav: raster(b.gt_trav),
        gt_slope: raster(b.gt_slope),
        goal: b.goal,
    })
}

#[pymodule]
fn pyaerodeploy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AerodeployError", m.py().get_type::<AerodeployError>())?;
    m.add_class::<Sim3>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<PointCloud>()?;
    m.add_class::<Raster>()?;
    m.add_class::<Grounding>()?;
    m.add_class::<Scene>()?;
    m.add_function(wrap_pyfunction!(ground, m)?)?;
    m.add_function(wrap_pyfunction!(umeyama_align, m)?)?;
    m.add_function(wrap_pyfunction!(ate, m)?)?;
    m.add_function(wrap_pyfunction!(rpe, m)?)?;
    m.add_function(wrap_pyfunction!(extract_target, m)?)?;
    m.add_function(wrap_pyfunction!(map_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(select_deployment, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_traversability, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
