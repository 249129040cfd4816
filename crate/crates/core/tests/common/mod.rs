#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_aerodeploy")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn aerodeploy")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "aerodeploy {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Runs `synth → ground → map → select → eval-trav` for the culvert scene
/// with seed 42 inside `dir` and returns the output directory of each stage.
pub fn culvert_pipeline(dir: &Path) -> PipelineOutputs {
    let scene = dir.join("scene");
    let grounded = dir.join("grounded");
    let maps = dir.join("maps");
    let zones = dir.join("zones.csv");
    let trav_report = dir.join("trav_report.txt");
    run_ok(&["synth", "--scene", "culvert", "--seed", "42", "--out-dir", s(&scene)]);
    run_ok(&[
        "ground",
        "--traj-v",
        s(&scene.join("traj_v.txt")),
        "--traj-p",
        s(&scene.join("traj_p.txt")),
        "--cloud",
        s(&scene.join("cloud.txt")),
        "--out-dir",
        s(&grounded),
    ]);
    run_ok(&[
        "map",
        "--cloud",
        s(&grounded.join("cloud_metric.txt")),
        "--grid",
        s(&scene.join("gt_trav.asc")),
        "--out-dir",
        s(&maps),
    ]);
    run_ok(&[
        "select",
        "--map",
        s(&maps.join("t.asc")),
        "--goal",
        "0",
        "4",
        "--out",
        s(&zones),
    ]);
    run_ok(&[
        "eval-trav",
        "--pred",
        s(&maps.join("t.asc")),
        "--gt",
        s(&scene.join("gt_trav.asc")),
        "--out",
        s(&trav_report),
    ]);
    PipelineOutputs {
        scene,
        grounded,
        maps,
        zones,
        trav_report,
    }
}

pub struct PipelineOutputs {
    pub scene: PathBuf,
    pub grounded: PathBuf,
    pub maps: PathBuf,
    pub zones: PathBuf,
    pub trav_report: PathBuf,
}

impl PipelineOutputs {
    /// Every file the pipeline produced, relative to the run directory.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for d in [&self.scene, &self.grounded, &self.maps] {
            let mut names: Vec<PathBuf> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            out.extend(names);
        }
        out.push(self.zones.clone());
        out.push(self.trav_report.clone());
        out
    }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/culvert_seed42")
}

/// `(golden file name, produced file)` pairs checked byte-for-byte.
pub fn golden_pairs(o: &PipelineOutputs) -> Vec<(&'static str, PathBuf)> {
    vec![
        ("manifest.txt", o.scene.join("manifest.txt")),
        ("ground_report.txt", o.grounded.join("ground_report.txt")),
        ("t.asc", o.maps.join("t.asc")),
        ("zones.csv", o.zones.clone()),
        ("trav_report.txt", o.trav_report.clone()),
    ]
}
