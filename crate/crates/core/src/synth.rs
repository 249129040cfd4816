//! Deterministic synthetic scenes: a labeled surface cloud in an arbitrary
//! reconstruction frame, a hover trajectory in both frames, the hidden
//! similarity between them, and analytic ground-truth rasters.
//!
//! All randomness comes from one `ChaCha8Rng` (rand_chacha) created with
//! `seed_from_u64(seed)`. Draw order: trajectory, similarity, scene layout,
//! surface points.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bev::GridSpec;
use crate::cloud::{LabeledPoint, LabeledPointCloud};
use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::geom::{PoseSE3, RotationSO3, Sim3Transform, Vec3};
use crate::raster::{write_esri_ascii, Raster};
use crate::trajectory::{FrameId, StampedPose, Trajectory};
use crate::traversability::classes::{GRASS, GRAVEL, ROCK, SOIL, STRUCTURE};

pub const SCENES: [&str; 5] = ["incline", "step", "culvert", "rockfield", "smoothed-rocks"];

/// Half-width of the square scene extent, meters.
pub const HALF_EXTENT: f64 = 8.0;
pub const SCENE_RESOLUTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    /// Surface points per square meter, rounded so that a whole number of
    /// jitter strata spans the extent.
    pub density: f64,
    /// Std-dev of vertical point noise, meters.
    pub noise_sigma: f64,
    pub incline_deg: f64,
    pub step_height: f64,
    pub n_rocks: usize,
    /// Height multiplier applied to rocks in `smoothed-rocks`.
    pub rock_flatten: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            density: 256.0,
            noise_sigma: 0.005,
            incline_deg: 20.0,
            step_height: 0.5,
            n_rocks: 24,
            rock_flatten: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub name: String,
    pub seed: u64,
    /// Reconstruction frame.
    pub cloud: LabeledPointCloud,
    pub traj_v: Trajectory,
    pub traj_p: Trajectory,
    /// Reconstruction → metric.
    pub gt_sim3: Sim3Transform,
    /// `1` traversable, `0` not.
    pub gt_trav: Raster<f64>,
    /// Radians, from the analytic surface at cell centers.
    pub gt_slope: Raster<f64>,
    /// Metric goal location (approach point of the scene's target).
    pub goal: (f64, f64),
    pub manifest: Vec<(String, String)>,
}

pub fn scene_grid() -> GridSpec {
    let n = (2.0 * HALF_EXTENT / SCENE_RESOLUTION).round() as usize;
    GridSpec::new(-HALF_EXTENT, -HALF_EXTENT, SCENE_RESOLUTION, n, n).expect("valid scene grid")
}

#[derive(Debug, Clone, Copy)]
struct Rock {
    x: f64,
    y: f64,
    radius: f64,
    height: f64,
}

impl Rock {
    fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.x).hypot(y - self.y) < self.radius
    }

    /// Paraboloid cap.
    fn height_at(&self, x: f64, y: f64) -> f64 {
        let r2 = ((x - self.x).powi(2) + (y - self.y).powi(2)) / self.radius.powi(2);
        if r2 < 1.0 {
            self.height * (1.0 - r2)
        } else {
            0.0
        }
    }
}

enum Surface {
    Incline { tan: f64 },
    Step { x0: f64, height: f64 },
    Rocks { rocks: Vec<Rock>, flatten: f64 },
    Culvert { rocks: Vec<Rock> },
}

const CORRIDOR_HALF_WIDTH: f64 = 2.0;
const EMBANKMENT_Y: f64 = 5.0;
const EMBANKMENT_HEIGHT: f64 = 1.5;
const CULVERT_GOAL: (f64, f64) = (0.0, 4.0);

impl Surface {
    fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Surface::Incline { tan } => x * tan,
            Surface::Step { x0, height } => {
                if x >= *x0 {
                    *height
                } else {
                    0.0
                }
            }
            Surface::Rocks { rocks, flatten } => rocks.iter().map(|r| r.height_at(x, y)).fold(0.0, f64::max) * flatten,
            Surface::Culvert { rocks } => {
                if y >= EMBANKMENT_Y {
                    EMBANKMENT_HEIGHT
                } else {
                    rocks.iter().map(|r| r.height_at(x, y)).fold(0.0, f64::max)
                }
            }
        }
    }

    fn class(&self, x: f64, y: f64) -> u32 {
        match self {
            Surface::Incline { .. } | Surface::Step { .. } => GRASS,
            Surface::Rocks { rocks, .. } => {
                if rocks.iter().any(|r| r.contains(x, y)) {
                    ROCK
                } else {
                    GRASS
                }
            }
            Surface::Culvert { rocks } => {
                if y >= EMBANKMENT_Y {
                    STRUCTURE
                } else if rocks.iter().any(|r| r.contains(x, y)) {
                    ROCK
                } else if x.abs() < CORRIDOR_HALF_WIDTH {
                    SOIL
                } else if y < -4.0 {
                    GRAVEL
                } else {
                    GRASS
                }
            }
        }
    }

    /// Ground-truth traversability at a cell center.
    fn traversable(&self, x: f64, y: f64, res: f64) -> bool {
        match self {
            Surface::Incline { .. } => true,
            Surface::Step { x0, .. } => (x - x0).abs() >= res,
            Surface::Rocks { .. } => self.class(x, y) != ROCK,
            Surface::Culvert { .. } => matches!(self.class(x, y), SOIL | GRASS),
        }
    }

    fn slope(&self, x: f64, y: f64) -> f64 {
        let h = 1e-5;
        let gx = (self.height(x + h, y) - self.height(x - h, y)) / (2.0 * h);
        let gy = (self.height(x, y + h) - self.height(x, y - h)) / (2.0 * h);
        gx.hypot(gy).atan()
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> RotationSO3 {
    // Normalized Gaussian 4-vector: uniform on SO(3).
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            if let Ok(r) = RotationSO3::from_quaternion(q[0] / n, q[1] / n, q[2] / n, q[3] / n) {
                return r;
            }
        }
    }
}

/// Camera poses on a loose loop at 8–12 m altitude, looking down with small
/// random tilts.
fn hover_trajectory(rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let n = rng.random_range(30..=80);
    let radius = rng.random_range(3.0..6.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let down = RotationSO3::from_axis_angle(&Vec3::x(), PI);
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let a = phase + 2.0 * PI * i as f64 / n as f64;
        let pos = Vec3::new(
            radius * a.cos() + rng.random_range(-0.3..0.3),
            0.7 * radius * a.sin() + rng.random_range(-0.3..0.3),
            10.0 + 2.0 * (1.5 * a).sin() + rng.random_range(-0.2..0.2),
        );
        let tilt_axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
        let tilt = if tilt_axis.norm() > 1e-6 {
            RotationSO3::from_axis_angle(&tilt_axis.normalize(), rng.random_range(0.0..5f64.to_radians()))
        } else {
            RotationSO3::identity()
        };
        let rotation = tilt * RotationSO3::rot_z(a + PI / 2.0) * down;
        poses.push(StampedPose {
            timestamp: 0.2 * i as f64,
            pose: PoseSE3::new(rotation, pos),
        });
    }
    Trajectory::new(FrameId::Metric, poses)
}

fn random_sim3(rng: &mut ChaCha8Rng) -> Result<Sim3Transform> {
    let scale = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
    let rotation = random_rotation(rng);
    let t = Vec3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    Sim3Transform::new(scale, rotation, t)
}

fn scatter_rocks(rng: &mut ChaCha8Rng, n: usize, keep: impl Fn(f64, f64, f64) -> bool) -> Vec<Rock> {
    let mut rocks = Vec::with_capacity(n);
    let mut attempts = 0;
    while rocks.len() < n && attempts < 100 * n {
        attempts += 1;
        let rock = Rock {
            x: rng.random_range(-HALF_EXTENT + 1.0..HALF_EXTENT - 1.0),
            y: rng.random_range(-HALF_EXTENT + 1.0..HALF_EXTENT - 1.0),
            radius: rng.random_range(0.4..0.9),
            height: rng.random_range(0.3..0.6),
        };
        if keep(rock.x, rock.y, rock.radius) {
            rocks.push(rock);
        }
    }
    rocks
}

pub fn synth_scene(name: &str, seed: u64, params: &SceneParams) -> Result<SceneBundle> {
    if !SCENES.contains(&name) {
        return Err(Error::UnknownScene(name.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj_metric = hover_trajectory(&mut rng)?;
    let gt_sim3 = random_sim3(&mut rng)?;
    let to_recon = gt_sim3.inverse();
    let traj_v = traj_metric.transformed(&to_recon, FrameId::Reconstruction);
    let traj_p = traj_v.transformed(&gt_sim3, FrameId::Metric);

    let mut manifest: Vec<(String, String)> = vec![
        ("scene".into(), name.into()),
        ("seed".into(), seed.to_string()),
        ("prng".into(), "ChaCha8Rng (rand_chacha 0.9) seed_from_u64".into()),
    ];
    let surface = match name {
        "incline" => {
            manifest.push(("incline_deg".into(), sig(params.incline_deg, 9)));
            Surface::Incline {
                tan: params.incline_deg.to_radians().tan(),
            }
        }
        "step" => {
            manifest.push(("step_height".into(), sig(params.step_height, 9)));
            Surface::Step {
                x0: 0.3,
                height: params.step_height,
            }
        }
        "culvert" => {
            let rocks = scatter_rocks(&mut rng, params.n_rocks, |x, y, r| {
                x.abs() - r > CORRIDOR_HALF_WIDTH + 0.5 && y + r < EMBANKMENT_Y
            });
            manifest.push(("n_rocks".into(), rocks.len().to_string()));
            Surface::Culvert { rocks }
        }
        _ => {
            let rocks = scatter_rocks(&mut rng, params.n_rocks, |_, _, _| true);
            let flatten = if name == "smoothed-rocks" {
                params.rock_flatten
            } else {
                1.0
            };
            manifest.push(("n_rocks".into(), rocks.len().to_string()));
            manifest.push(("rock_height_scale".into(), sig(flatten, 9)));
            Surface::Rocks { rocks, flatten }
        }
    };
    let goal = if name == "culvert" { CULVERT_GOAL } else { (0.0, 0.0) };

    // Jittered-grid sampling: one point per square stratum, strata laid out
    // row-major from the south-west corner.
    let extent = 2.0 * HALF_EXTENT;
    let per_side = ((extent * params.density.sqrt()).round() as usize).max(1);
    let stratum = extent / per_side as f64;
    let n_points = per_side * per_side;
    let noise = Normal::new(0.0, params.noise_sigma)
        .map_err(|_| Error::ConfigInvalid("noise_sigma must be non-negative".into()))?;
    let mut points = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let (sy, sx) = (i / per_side, i % per_side);
        let x = -HALF_EXTENT + (sx as f64 + rng.random_range(0.0..1.0)) * stratum;
        let y = -HALF_EXTENT + (sy as f64 + rng.random_range(0.0..1.0)) * stratum;
        let z = surface.height(x, y) + noise.sample(&mut rng);
        let conf = rng.random_range(0.85..=1.0);
        points.push(LabeledPoint::new(
            to_recon.apply_point(&Vec3::new(x, y, z)),
            surface.class(x, y),
            conf,
        ));
    }
    let cloud = LabeledPointCloud::new(FrameId::Reconstruction, points)?;

    let spec = scene_grid();
    let mut gt_trav = Raster::filled(spec, None);
    let mut gt_slope = Raster::filled(spec, None);
    for row in 0..spec.nrows {
        for col in 0..spec.ncols {
            let (x, y) = spec.center(row, col);
            let t = surface.traversable(x, y, spec.resolution);
            gt_trav.set(row, col, Some(if t { 1.0 } else { 0.0 }));
            gt_slope.set(row, col, Some(surface.slope(x, y)));
        }
    }

    let q = gt_sim3.rotation.to_quaternion();
    let t = gt_sim3.translation;
    manifest.extend([
        ("density".into(), sig(params.density, 9)),
        ("noise_sigma".into(), sig(params.noise_sigma, 9)),
        ("n_points".into(), n_points.to_string()),
        ("n_poses".into(), traj_v.len().to_string()),
        (
            "extent".into(),
            format!("{} {} {} {}", -HALF_EXTENT, -HALF_EXTENT, HALF_EXTENT, HALF_EXTENT),
        ),
        ("resolution".into(), sig(SCENE_RESOLUTION, 9)),
        ("gt_scale".into(), sig(gt_sim3.scale(), 17)),
        (
            "gt_quaternion".into(),
            q.iter().map(|v| sig(*v, 17)).collect::<Vec<_>>().join(" "),
        ),
        (
            "gt_translation".into(),
            format!("{} {} {}", sig(t.x, 17), sig(t.y, 17), sig(t.z, 17)),
        ),
        ("goal_x".into(), sig(goal.0, 9)),
        ("goal_y".into(), sig(goal.1, 9)),
    ]);

    Ok(SceneBundle {
        name: name.to_string(),
        seed,
        cloud,
        traj_v,
        traj_p,
        gt_sim3,
        gt_trav,
        gt_slope,
        goal,
        manifest,
    })
}

impl SceneBundle {
    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.manifest {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    /// Writes `cloud.txt`, `traj_v.txt`, `traj_p.txt`, `gt_trav.asc`,
    /// `gt_slope.asc` and `manifest.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.cloud.write(&dir.join("cloud.txt"))?;
        self.traj_v.write(&dir.join("traj_v.txt"))?;
        self.traj_p.write(&dir.join("traj_p.txt"))?;
        write_esri_ascii(&dir.join("gt_trav.asc"), &self.gt_trav)?;
        write_esri_ascii(&dir.join("gt_slope.asc"), &self.gt_slope)?;
        fs::write(dir.join("manifest.txt"), self.manifest_text())?;
        Ok(())
    }
}
