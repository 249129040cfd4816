mod common;

use std::fs;

use aerodeploy::geom::{PoseSE3, RotationSO3, Vec3};
use aerodeploy::lift::{depth_file_name, mask_file_name, pose_file_name, write_pgm, DepthFrame, Intrinsics};
use aerodeploy::trajectory::{FrameId, Trajectory};
use common::{culvert_pipeline, golden_dir, golden_pairs, run, run_ok};

fn p(path: &std::path::Path) -> &str {
    path.to_str().unwrap()
}

fn write_walk(path: &std::path::Path) {
    let positions: Vec<Vec3> = (0..12)
        .map(|i| {
            let t = i as f64;
            Vec3::new(t.cos() * 2.0, t.sin(), 0.1 * t * t)
        })
        .collect();
    Trajectory::from_positions(FrameId::Metric, &positions, 0.5)
        .unwrap()
        .write(path)
        .unwrap();
}

#[test]
fn eval_traj_identity_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    write_walk(&a);
    let out = run_ok(&["eval-traj", "--gt", p(&a), "--est", p(&a)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("ate_rmse: 0.000000"), "{stdout}");
    assert!(stdout.contains("rpe_rot_rmse: 0.000000"));
}

#[test]
fn error_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--scene", "moon", "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownScene"));

    let out = run(&["eval-traj", "--gt", "/nonexistent/a.txt", "--est", "/nonexistent/b.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IoError"));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["select", "--map", "t.asc"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn select_goal_outside_grid() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("t.asc");
    fs::write(
        &map,
        "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 1\n1 1\n",
    )
    .unwrap();
    let zones = dir.path().join("zones.csv");
    let out = run(&["select", "--map", p(&map), "--goal", "5", "-1", "--out", p(&zones)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GoalOutOfBounds"));

    run_ok(&["select", "--map", p(&map), "--goal", "0.5", "0.5", "--out", p(&zones)]);
    let csv = fs::read_to_string(&zones).unwrap();
    assert!(csv.starts_with("rank,row,col,x,y,T,goal_distance,objective,reachable\n1,0,0,0.5,0.5,1,0,1,true\n"));
}

#[test]
fn culvert_pipeline_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = culvert_pipeline(dir.path());
    for (name, produced) in golden_pairs(&o) {
        let expected = fs::read(golden_dir().join(name)).unwrap();
        assert!(
            fs::read(&produced).unwrap() == expected,
            "{name} differs from golden copy"
        );
    }
    // Top-ranked zone lies on the approach corridor, in front of the embankment.
    let csv = fs::read_to_string(&o.zones).unwrap();
    let first: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(3)
        .take(2)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(first[0].abs() < 2.0 && first[1] < 5.0, "{csv}");
}

/// Recomputes Σ‖Δp − sRΔv‖² from the trajectory files and the reported
/// scale and quaternion.
#[test]
fn ground_report_residual_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let out_dir = dir.path().join("g");
    run_ok(&[
        "synth",
        "--scene",
        "rockfield",
        "--seed",
        "9",
        "--density",
        "5",
        "--out-dir",
        p(&scene),
    ]);
    let out = run_ok(&[
        "ground",
        "--traj-v",
        p(&scene.join("traj_v.txt")),
        "--traj-p",
        p(&scene.join("traj_p.txt")),
        "--cloud",
        p(&scene.join("cloud.txt")),
        "--out-dir",
        p(&out_dir),
    ]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(report, fs::read_to_string(out_dir.join("ground_report.txt")).unwrap());
    let field = |k: &str| -> Vec<f64> {
        let line = report.lines().find(|l| l.starts_with(&format!("{k}:"))).unwrap();
        line[k.len() + 1..]
            .split_whitespace()
            .map(|v| v.parse().unwrap())
            .collect()
    };
    let s = field("scale")[0];
    let q = field("rotation_quaternion");
    let r = RotationSO3::from_quaternion(q[0], q[1], q[2], q[3]).unwrap();
    let v = Trajectory::read(&scene.join("traj_v.txt"), FrameId::Reconstruction)
        .unwrap()
        .positions();
    let pm = Trajectory::read(&scene.join("traj_p.txt"), FrameId::Metric)
        .unwrap()
        .positions();
    let mut residual = 0.0;
    for k in [1usize, 2, 4, 8] {
        for i in 0..v.len().saturating_sub(k) {
            let dv = v[i + k] - v[i];
            let dp = pm[i + k] - pm[i];
            residual += (dp - s * r.rotate(&dv)).norm_squared();
        }
    }
    assert!((residual - field("residual")[0]).abs() < 1e-9);
    let gt_scale: f64 = fs::read_to_string(scene.join("manifest.txt"))
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("gt_scale: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((s / gt_scale - 1.0).abs() < 1e-6);
}

#[test]
fn map_render_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    run_ok(&[
        "synth",
        "--scene",
        "step",
        "--seed",
        "1",
        "--density",
        "40",
        "--out-dir",
        p(&scene),
    ]);
    // The scene cloud is in the reconstruction frame; ground it first.
    let g = dir.path().join("g");
    run_ok(&[
        "ground",
        "--traj-v",
        p(&scene.join("traj_v.txt")),
        "--traj-p",
        p(&scene.join("traj_p.txt")),
        "--cloud",
        p(&scene.join("cloud.txt")),
        "--out-dir",
        p(&g),
    ]);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[traversability]\nalpha = 1.0\n[mapping]\nresolution = 0.5\n").unwrap();
    let m1 = dir.path().join("m1");
    let m2 = dir.path().join("m2");
    run_ok(&["map", "--cloud", p(&g.join("cloud_metric.txt")), "--out-dir", p(&m1)]);
    run_ok(&[
        "map",
        "--cloud",
        p(&g.join("cloud_metric.txt")),
        "--out-dir",
        p(&m2),
        "--config",
        p(&cfg),
    ]);
    let head = |d: &std::path::Path| {
        fs::read_to_string(d.join("t.asc"))
            .unwrap()
            .lines()
            .nth(4)
            .unwrap()
            .to_string()
    };
    assert_eq!(head(&m1), "cellsize 0.25");
    assert_eq!(head(&m2), "cellsize 0.5");

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[traversability]\nbogus = 1\n").unwrap();
    let out = run(&[
        "map",
        "--cloud",
        p(&g.join("cloud_metric.txt")),
        "--out-dir",
        p(&m2),
        "--config",
        p(&bad),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ConfigInvalid"));

    let ppm = dir.path().join("t.ppm");
    run_ok(&["render", "--raster", p(&m1.join("t.asc")), "--out", p(&ppm)]);
    let bytes = fs::read(&ppm).unwrap();
    let header = b"P6\n";
    assert!(bytes.starts_with(header));
    let text = String::from_utf8_lossy(&bytes[..20]).to_string();
    let dims: Vec<usize> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    let header_len = format!("P6\n{} {}\n255\n", dims[0], dims[1]).len();
    assert_eq!(bytes.len(), header_len + dims[0] * dims[1] * 3);

    let m3 = dir.path().join("m3");
    let gt = scene.join("gt_trav.asc");
    run_ok(&[
        "map",
        "--cloud",
        p(&g.join("cloud_metric.txt")),
        "--out-dir",
        p(&m3),
        "--grid",
        p(&gt),
    ]);
    let report = run_ok(&["eval-trav", "--pred", p(&m3.join("t.asc")), "--gt", p(&gt)]);
    let report = String::from_utf8(report.stdout).unwrap();
    assert!(report.contains("roc_auc: "));
}

#[test]
fn select_by_goal_class() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cloud.txt");
    let mut text = String::from("# frame: metric\n");
    for i in 0..40 {
        for j in 0..40 {
            let class = if (10..15).contains(&i) && (10..15).contains(&j) {
                9
            } else {
                1
            };
            text.push_str(&format!(
                "{} {} 0 {class} 1\n",
                i as f64 * 0.1 + 0.05,
                j as f64 * 0.1 + 0.05
            ));
        }
    }
    fs::write(&cloud, text).unwrap();
    let maps = dir.path().join("m");
    run_ok(&["map", "--cloud", p(&cloud), "--out-dir", p(&maps)]);
    let zones = dir.path().join("zones.csv");
    let out = run_ok(&[
        "select",
        "--map",
        p(&maps.join("t.asc")),
        "--goal-class",
        "9",
        "--cloud",
        p(&cloud),
        "--out",
        p(&zones),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("goal: 1.25 1.25"), "{stdout}");
    let out = run(&[
        "select",
        "--map",
        p(&maps.join("t.asc")),
        "--goal-class",
        "4",
        "--cloud",
        p(&cloud),
        "--out",
        p(&zones),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ClassAbsent"));
}

#[test]
fn lift_depth_and_masks() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    let masks = dir.path().join("masks");
    fs::create_dir_all(&frames).unwrap();
    fs::create_dir_all(&masks).unwrap();
    let k = Intrinsics {
        fx: 4.0,
        fy: 4.0,
        cx: 2.0,
        cy: 2.0,
    };
    for t in 0..2 {
        let pose = PoseSE3::new(RotationSO3::identity(), Vec3::new(t as f64, 0.0, 0.0));
        DepthFrame::new(4, 4, vec![2.0; 16], k, pose)
            .unwrap()
            .write(&frames.join(depth_file_name(t)), &frames.join(pose_file_name(t)))
            .unwrap();
    }
    let left: Vec<u8> = (0..16).map(|i| if i % 4 < 2 { 255 } else { 0 }).collect();
    write_pgm(&masks.join(mask_file_name(0, 1, 3)), 4, 4, &left).unwrap();
    let out_cloud = dir.path().join("cloud.txt");
    let out = run_ok(&[
        "lift",
        "--frames",
        p(&frames),
        "--masks",
        p(&masks),
        "--out",
        p(&out_cloud),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("keyframes: 0 1"), "{stdout}");
    let cloud = aerodeploy::cloud::LabeledPointCloud::read(&out_cloud, FrameId::Reconstruction).unwrap();
    assert_eq!(cloud.len(), 32);
    assert_eq!(cloud.class_points(3).count(), 8);
}
