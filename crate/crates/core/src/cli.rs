//! Command-line front end. Exit codes: 0 success, 1 domain error (error name
//! on stderr), 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::cloud::LabeledPointCloud;
use crate::config::RunConfig;
use crate::deployment::{select_deployment, zones_csv};
use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::grounding::{estimate_grounding, ground, GroundingResult};
use crate::lift::{
    extract_target, lift_sequence, load_depth_dir, load_mask_dir, TargetOptions, DEFAULT_KEYFRAME_DELTA,
};
use crate::metrics::evaluate_trajectory;
use crate::pipeline::map_cloud;
use crate::raster::{read_esri_ascii, Raster};
use crate::render::render_heatmap;
use crate::synth::{synth_scene, SceneParams};
use crate::trajectory::{FrameId, Trajectory};
use crate::traversability::evaluate;

#[derive(Debug, Parser)]
#[command(
    name = "aerodeploy",
    version,
    about = "Ground aerial reconstructions, map traversability, pick deployment zones"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the reconstruction-to-metric similarity from egomotion and apply it.
    Ground(GroundArgs),
    /// Turn depth frames and instance masks into a labeled point cloud.
    Lift(LiftArgs),
    /// Build BEV, feature and traversability rasters from a metric cloud.
    Map(MapArgs),
    /// Rank deployment zones on a traversability raster.
    Select(SelectArgs),
    /// ATE/RPE of an estimated trajectory against ground truth.
    EvalTraj(EvalTrajArgs),
    /// mACC, aAcc, ROC-AUC and MSE of a traversability raster.
    EvalTrav(EvalTravArgs),
    /// Generate a deterministic synthetic scene bundle.
    Synth(SynthArgs),
    /// Render a raster as a red-to-green PPM heatmap.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    /// Reconstruction-frame trajectory.
    #[arg(long)]
    pub traj_v: PathBuf,
    /// Metric platform trajectory.
    #[arg(long)]
    pub traj_p: PathBuf,
    /// Reconstruction-frame labeled cloud.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Receives cloud_metric.txt, traj_metric.txt and ground_report.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    /// Directory of frame<t>.depth files with frame<t>.pose sidecars.
    #[arg(long)]
    pub frames: PathBuf,
    /// Directory of frame<t>_inst<k>_class<c>.pgm masks.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// IoU at or above which the weaker of two masks is dropped.
    #[arg(long, default_value_t = 0.5)]
    pub nms_iou: f64,
    #[arg(long, default_value_t = DEFAULT_KEYFRAME_DELTA)]
    pub keyframe_delta: f64,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Metric labeled cloud.
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// ESRI grid whose geometry the output rasters should share.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("goal_source").required(true).args(["goal", "goal_class"])))]
pub struct SelectArgs {
    /// Traversability raster (t.asc).
    #[arg(long)]
    pub map: PathBuf,
    /// Goal in metric x y.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true, conflicts_with = "goal_class")]
    pub goal: Option<Vec<f64>>,
    /// Use the medoid of this class in --cloud as the goal.
    #[arg(long, requires = "cloud")]
    pub goal_class: Option<u32>,
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalTrajArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalTravArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Binary ground truth (1 traversable, 0 not).
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// incline, step, culvert, rockfield or smoothed-rocks.
    #[arg(long)]
    pub scene: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Surface points per square meter.
    #[arg(long)]
    pub density: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::read(p),
        None => Ok(RunConfig::default()),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(p) = out {
        fs::write(p, text)?;
    }
    Ok(())
}

pub fn ground_report(g: &GroundingResult) -> String {
    let t = &g.transform;
    let q = t.rotation.to_quaternion();
    let tr = t.translation;
    format!(
        "# reconstruction -> metric; residual = sum |dp - s R dv|^2 over all displacement pairs\n\
         scale: {}\nrotation_angle_deg: {}\nrotation_quaternion: {} {} {} {}\ntranslation: {} {} {}\n\
         residual: {}\nn_pairs: {}\ncollinear: {}\n",
        sig(t.scale(), 17),
        sig(t.rotation.angle().to_degrees(), 17),
        sig(q[0], 17),
        sig(q[1], 17),
        sig(q[2], 17),
        sig(q[3], 17),
        sig(tr.x, 17),
        sig(tr.y, 17),
        sig(tr.z, 17),
        sig(g.fit.residual, 17),
        g.fit.n_pairs,
        g.fit.collinear
    )
}

fn run_ground(a: &GroundArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let traj_v = Trajectory::read(&a.traj_v, FrameId::Reconstruction)?;
    let traj_p = Trajectory::read(&a.traj_p, FrameId::Metric)?;
    let cloud = LabeledPointCloud::read(&a.cloud, FrameId::Reconstruction)?;
    let g = estimate_grounding(&traj_v, &traj_p, &cfg.grounding)?;
    let (traj_m, cloud_m) = ground(&traj_v, &cloud, &g.transform);
    fs::create_dir_all(&a.out_dir)?;
    cloud_m.write(&a.out_dir.join("cloud_metric.txt"))?;
    traj_m.write(&a.out_dir.join("traj_metric.txt"))?;
    let report = ground_report(&g);
    fs::write(a.out_dir.join("ground_report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn run_lift(a: &LiftArgs) -> Result<()> {
    let frames = load_depth_dir(&a.frames)?;
    let masks = load_mask_dir(&a.masks)?;
    let out = lift_sequence(&frames, &masks, a.nms_iou, a.keyframe_delta)?;
    out.cloud.write(&a.out)?;
    let keys: Vec<String> = out.keyframes.iter().map(|k| k.to_string()).collect();
    println!(
        "frames: {}\nkeyframes: {}\npoints: {}",
        frames.len(),
        keys.join(" "),
        out.cloud.len()
    );
    Ok(())
}

fn run_map(a: &MapArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let cloud = LabeledPointCloud::read(&a.cloud, FrameId::Metric)?;
    let spec = match &a.grid {
        Some(p) => Some(read_esri_ascii::<f64>(p)?.spec),
        None => None,
    };
    let m = map_cloud(&cloud, spec, &cfg)?;
    m.write(&a.out_dir, &cfg.thresholds)?;
    let s = m.grid.spec;
    println!(
        "grid: {} x {} cells at {} m\npoints: {}\ndropped: {}\nobstacles: {}",
        s.nrows,
        s.ncols,
        sig(s.resolution, 9),
        cloud.len(),
        m.grid.dropped,
        m.features.obstacles.len()
    );
    Ok(())
}

fn run_select(a: &SelectArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let map: Raster<f64> = read_esri_ascii(&a.map)?;
    let goal = match (&a.goal, a.goal_class, &a.cloud) {
        (Some(g), _, _) => (g[0], g[1]),
        (None, Some(class), Some(cloud)) => {
            let cloud = LabeledPointCloud::read(cloud, FrameId::Metric)?;
            let t = extract_target(&cloud, class, &TargetOptions::default())?;
            println!(
                "target: class {} {} ({} points, confidence {})",
                class,
                t.method.as_str(),
                t.point_count,
                sig(t.confidence, 6)
            );
            if let Some(seed) = t.seed {
                println!("target_seed: {seed}");
            }
            (t.representative.x, t.representative.y)
        }
        _ => unreachable!("clap enforces a goal source"),
    };
    println!("goal: {} {}", sig(goal.0, 9), sig(goal.1, 9));
    let zones = select_deployment(&map, goal, &cfg.deployment)?;
    let csv = zones_csv(&zones);
    fs::write(&a.out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn run_eval_traj(a: &EvalTrajArgs) -> Result<()> {
    let gt = Trajectory::read(&a.gt, FrameId::Metric)?;
    let est = Trajectory::read(&a.est, FrameId::Metric)?;
    emit(&evaluate_trajectory(&gt, &est, a.delta)?.to_text(), &a.out)
}

fn run_eval_trav(a: &EvalTravArgs) -> Result<()> {
    let pred: Raster<f64> = read_esri_ascii(&a.pred)?;
    let gt: Raster<f64> = read_esri_ascii(&a.gt)?;
    emit(&evaluate(&pred, &gt)?.to_text(), &a.out)
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let mut params = SceneParams::default();
    if let Some(d) = a.density {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::ConfigInvalid("density must be positive".into()));
        }
        params.density = d;
    }
    let b = synth_scene(&a.scene, a.seed, &params)?;
    b.write(&a.out_dir)?;
    print!("{}", b.manifest_text());
    Ok(())
}

fn run_render(a: &RenderArgs) -> Result<()> {
    let r: Raster<f64> = read_esri_ascii(&a.raster)?;
    render_heatmap(&r, &a.out)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ground(a) => run_ground(a),
        Command::Lift(a) => run_lift(a),
        Command::Map(a) => run_map(a),
        Command::Select(a) => run_select(a),
        Command::EvalTraj(a) => run_eval_traj(a),
        Command::EvalTrav(a) => run_eval_trav(a),
        Command::Synth(a) => run_synth(a),
        Command::Render(a) => run_render(a),
    }
}

/// Parses `argv` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            1
        }
    }
}
