//! Lifting per-frame depth and instance masks into a labeled 3D point cloud.
//!
//! Depth pixels are back-projected with the frame's intrinsics and extrinsic
//! `[R | t]` as `X = R⁻¹(K⁻¹[u, v, 1]ᵀ·D(u, v) − t)`, with `(u, v)` the integer
//! column and row. Each point takes the class of the highest-valued mask at
//! its pixel (lowest instance id on ties) and that mask's quality as its
//! confidence. Pixels under no mask are labeled [`UNLABELED`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{LabeledPoint, LabeledPointCloud, UNLABELED};
use crate::error::{Error, Result};
use crate::geom::{PoseSE3, Vec3};
use crate::trajectory::{FrameId, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Malformed(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    /// `K⁻¹[u, v, 1]ᵀ`.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major; values `<= 0` or non-finite mark missing depth.
    pub depth: Vec<f32>,
    pub intrinsics: Intrinsics,
    /// Extrinsic `[R | t]` as used by the back-projection above.
    pub pose: PoseSE3,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<f32>, intrinsics: Intrinsics, pose: PoseSE3) -> Result<Self> {
        intrinsics.validate()?;
        if width == 0 || height == 0 || depth.len() != width * height {
            return Err(Error::Malformed(format!(
                "depth raster has {} values for {width}x{height}",
                depth.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            intrinsics,
            pose,
        })
    }

    pub fn depth_at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.depth[v * self.width + u] as f64;
        (d.is_finite() && d > 0.0).then_some(d)
    }

    /// Reads the `DEPTH <W> <H> fx fy cx cy` header plus little-endian `f32`
    /// raster, and the extrinsic from a one-line trajectory file.
    pub fn read(depth_path: &Path, pose_path: &Path) -> Result<Self> {
        let bytes = fs::read(depth_path)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Malformed("depth header missing".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Malformed("depth header not text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "DEPTH" {
            return Err(Error::Malformed(format!("bad depth header '{header}'")));
        }
        let bad = |_| Error::Malformed(format!("bad depth header '{header}'"));
        let width: usize = fields[1].parse().map_err(|_| Error::Malformed(header.into()))?;
        let height: usize = fields[2].parse().map_err(|_| Error::Malformed(header.into()))?;
        let k: Vec<f64> = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?;
        let body = &bytes[nl + 1..];
        if body.len() != width * height * 4 {
            return Err(Error::Malformed(format!(
                "depth body has {} bytes, expected {}",
                body.len(),
                width * height * 4
            )));
        }
        let depth = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let traj = Trajectory::read(pose_path, FrameId::Reconstruction)?;
        let [first] = traj.poses() else {
            return Err(Error::Malformed(format!(
                "pose sidecar must hold exactly one pose, found {}",
                traj.len()
            )));
        };
        let intrinsics = Intrinsics {
            fx: k[0],
            fy: k[1],
            cx: k[2],
            cy: k[3],
        };
        Self::new(width, height, depth, intrinsics, first.pose)
    }

    pub fn write(&self, depth_path: &Path, pose_path: &Path) -> Result<()> {
        let k = &self.intrinsics;
        let mut out = format!(
            "DEPTH {} {} {} {} {} {}\n",
            self.width, self.height, k.fx, k.fy, k.cx, k.cy
        )
        .into_bytes();
        for d in &self.depth {
            out.extend_from_slice(&d.to_le_bytes());
        }
        fs::write(depth_path, out)?;
        let traj = Trajectory::new(
            FrameId::Reconstruction,
            vec![crate::trajectory::StampedPose {
                timestamp: 0.0,
                pose: self.pose,
            }],
        )?;
        traj.write(pose_path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnprojectedPixel {
    pub u: usize,
    pub v: usize,
    pub point: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Unprojection {
    pub pixels: Vec<UnprojectedPixel>,
    pub skipped: usize,
}

pub fn unproject(frame: &DepthFrame) -> Unprojection {
    let r_inv = frame.pose.rotation.inverse();
    let t = frame.pose.translation;
    let mut out = Unprojection::default();
    for v in 0..frame.height {
        for u in 0..frame.width {
            match frame.depth_at(u, v) {
                Some(d) => {
                    let cam = frame.intrinsics.ray(u as f64, v as f64) * d;
                    out.pixels.push(UnprojectedPixel {
                        u,
                        v,
                        point: r_inv.rotate(&(cam - t)),
                    });
                }
                None => out.skipped += 1,
            }
        }
    }
    out
}

/// One instance's per-pixel mask scores in `[0, 1]` for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub instance_id: u32,
    pub class_id: u32,
    pub quality: f64,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl InstanceMask {
    pub fn new(
        instance_id: u32,
        class_id: u32,
        quality: f64,
        width: usize,
        height: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Malformed(format!(
                "mask {instance_id} has {} values for {width}x{height}",
                values.len()
            )));
        }
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::Malformed(format!("mask quality {quality} outside [0, 1]")));
        }
        Ok(Self {
            instance_id,
            class_id,
            quality,
            width,
            height,
            values,
        })
    }

    pub fn from_binary(
        instance_id: u32,
        class_id: u32,
        quality: f64,
        width: usize,
        height: usize,
        on: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let values = (0..height)
            .flat_map(|v| (0..width).map(move |u| (u, v)))
            .map(|(u, v)| if on(u, v) { 1.0 } else { 0.0 })
            .collect();
        Self::new(instance_id, class_id, quality, width, height, values)
    }

    pub fn covers(&self, idx: usize) -> bool {
        self.values[idx] > 0.0
    }

    pub fn area(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Masks of one frame, instance ids unique.
pub fn validate_frame_masks(masks: &[InstanceMask], width: usize, height: usize) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for m in masks {
        if m.width != width || m.height != height {
            return Err(Error::ShapeMismatch(format!(
                "mask {} is {}x{}, frame is {width}x{height}",
                m.instance_id, m.width, m.height
            )));
        }
        if !seen.insert(m.instance_id) {
            return Err(Error::Malformed(format!("duplicate instance id {}", m.instance_id)));
        }
    }
    Ok(())
}

pub fn mask_iou(a: &InstanceMask, b: &InstanceMask) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..a.values.len() {
        let (x, y) = (a.covers(i), b.covers(i));
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy overlap suppression: masks are visited by descending quality
/// (lower instance id first on equal quality) and dropped when their IoU with
/// any kept mask reaches `iou_threshold`. Kept masks are returned in visiting
/// order.
pub fn mask_nms(masks: &[InstanceMask], iou_threshold: f64) -> Result<Vec<InstanceMask>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "IoU threshold {iou_threshold} outside (0, 1]"
        )));
    }
    let mut order: Vec<&InstanceMask> = masks.iter().collect();
    order.sort_by(|a, b| b.quality.total_cmp(&a.quality).then(a.instance_id.cmp(&b.instance_id)));
    let mut kept: Vec<InstanceMask> = Vec::new();
    for m in order {
        if kept.iter().all(|k| mask_iou(k, m) < iou_threshold) {
            kept.push(m.clone());
        }
    }
    Ok(kept)
}

/// `ρ = 1 − |Ω| / (H·W)`, Ω the union of all mask pixels.
pub fn uncovered_ratio(masks: &[InstanceMask], width: usize, height: usize) -> f64 {
    let n = width * height;
    if n == 0 {
        return 1.0;
    }
    let covered = (0..n).filter(|&i| masks.iter().any(|m| m.covers(i))).count();
    1.0 - covered as f64 / n as f64
}

pub const DEFAULT_KEYFRAME_DELTA: f64 = 0.15;

pub fn keyframe_trigger(rho_t: f64, rho_ref: f64, delta: f64) -> bool {
    rho_t - rho_ref > delta
}

/// Indices of keyframes in a sequence of uncovered ratios. The first frame is
/// always a keyframe; later frames are compared against the latest keyframe.
pub fn select_keyframes(rhos: &[f64], delta: f64) -> Vec<usize> {
    let mut keys = Vec::new();
    let mut rho_ref = None;
    for (i, &rho) in rhos.iter().enumerate() {
        let trigger = match rho_ref {
            None => true,
            Some(r) => keyframe_trigger(rho, r, delta),
        };
        if trigger {
            keys.push(i);
            rho_ref = Some(rho);
        }
    }
    keys
}

/// Index of the winning mask at pixel `idx`, or `None` if no mask scores
/// above zero there.
fn winning_mask(masks: &[InstanceMask], idx: usize) -> Option<&InstanceMask> {
    let mut best: Option<&InstanceMask> = None;
    for m in masks {
        let v = m.values[idx];
        if v <= 0.0 {
            continue;
        }
        best = match best {
            Some(b) if b.values[idx] > v || (b.values[idx] == v && b.instance_id < m.instance_id) => Some(b),
            _ => Some(m),
        };
    }
    best
}

/// Back-projects `frame` and labels every valid pixel. `depth_confidence`,
/// when given, multiplies the mask quality per pixel.
pub fn assign_labels(
    frame: &DepthFrame,
    masks: &[InstanceMask],
    depth_confidence: Option<&[f32]>,
) -> Result<Vec<LabeledPoint>> {
    validate_frame_masks(masks, frame.width, frame.height)?;
    if let Some(c) = depth_confidence {
        if c.len() != frame.width * frame.height {
            return Err(Error::ShapeMismatch("depth confidence raster".into()));
        }
    }
    let points = unproject(frame)
        .pixels
        .into_iter()
        .map(|px| {
            let idx = px.v * frame.width + px.u;
            let (class_id, quality) = match winning_mask(masks, idx) {
                Some(m) => (m.class_id, m.quality),
                None => (UNLABELED, 0.0),
            };
            let scale = depth_confidence.map_or(1.0, |c| (c[idx] as f64).clamp(0.0, 1.0));
            LabeledPoint::new(px.point, class_id, quality * scale)
        })
        .collect();
    Ok(points)
}

/// Labels every frame and concatenates the points in frame order.
pub fn lift_frames(frames: &[(DepthFrame, Vec<InstanceMask>)]) -> Result<LabeledPointCloud> {
    let mut points = Vec::new();
    for (frame, masks) in frames {
        points.extend(assign_labels(frame, masks, None)?);
    }
    LabeledPointCloud::new(FrameId::Reconstruction, points)
}

pub const DEFAULT_MEDOID_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMethod {
    Medoid,
    SampledMedoid,
    Centroid,
}

impl TargetMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetMethod::Medoid => "medoid",
            TargetMethod::SampledMedoid => "sampled-medoid",
            TargetMethod::Centroid => "centroid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetOptions {
    pub medoid_cap: usize,
    pub seed: u64,
    pub force_centroid: bool,
}

impl Default for TargetOptions {
    fn default() -> Self {
        Self {
            medoid_cap: DEFAULT_MEDOID_CAP,
            seed: 0,
            force_centroid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticTarget {
    pub class_id: u32,
    pub representative: Vec3,
    pub confidence: f64,
    pub method: TargetMethod,
    pub point_count: usize,
    /// Sampling seed, set only for [`TargetMethod::SampledMedoid`].
    pub seed: Option<u64>,
}

/// Member minimizing the summed Euclidean distance to all members; lowest
/// index on ties.
pub fn medoid(points: &[Vec3]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let total: f64 = points.iter().map(|q| (p - q).norm()).sum();
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((i, total));
        }
    }
    best.map(|(i, _)| i)
}

pub fn extract_target(cloud: &LabeledPointCloud, class_id: u32, opts: &TargetOptions) -> Result<SemanticTarget> {
    let members: Vec<&LabeledPoint> = cloud.class_points(class_id).collect();
    if members.is_empty() {
        return Err(Error::ClassAbsent(class_id));
    }
    let n = members.len();
    let confidence = members.iter().map(|p| p.confidence).sum::<f64>() / n as f64;
    let positions: Vec<Vec3> = members.iter().map(|p| p.position).collect();

    let (representative, method, seed) = if opts.force_centroid {
        let c = positions.iter().sum::<Vec3>() / n as f64;
        (c, TargetMethod::Centroid, None)
    } else if n <= opts.medoid_cap.max(1) {
        let i = medoid(&positions).expect("non-empty");
        (positions[i], TargetMethod::Medoid, None)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, opts.medoid_cap.max(1)).into_vec();
        idx.sort_unstable();
        let sample: Vec<Vec3> = idx.iter().map(|&i| positions[i]).collect();
        let i = medoid(&sample).expect("non-empty");
        (sample[i], TargetMethod::SampledMedoid, Some(opts.seed))
    };
    Ok(SemanticTarget {
        class_id,
        representative,
        confidence,
        method,
        point_count: n,
        seed,
    })
}

/// Reads a binary (P5) PGM with 8-bit samples.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Malformed(format!("{}: truncated PGM header", path.display())));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let bad = || Error::Malformed(format!("{}: bad PGM header", path.display()));
    if tokens[0] != "P5" {
        return Err(bad());
    }
    let w: usize = tokens[1].parse().map_err(|_| bad())?;
    let h: usize = tokens[2].parse().map_err(|_| bad())?;
    let maxval: usize = tokens[3].parse().map_err(|_| bad())?;
    if maxval == 0 || maxval > 255 || bytes.len() < pos + w * h {
        return Err(bad());
    }
    Ok((w, h, bytes[pos..pos + w * h].to_vec()))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(data)?;
    Ok(())
}

/// Parses `frame{t:05}_inst{k:04}_class{c}.pgm` into `(t, k, c)`.
pub fn parse_mask_name(name: &str) -> Option<(usize, u32, u32)> {
    let stem = name.strip_suffix(".pgm")?;
    let rest = stem.strip_prefix("frame")?;
    let (t, rest) = rest.split_once("_inst")?;
    let (k, c) = rest.split_once("_class")?;
    Some((t.parse().ok()?, k.parse().ok()?, c.parse().ok()?))
}

pub fn mask_file_name(frame: usize, instance: u32, class: u32) -> String {
    format!("frame{frame:05}_inst{instance:04}_class{class}.pgm")
}

/// Loads every mask file in `dir`, grouped by frame index. Qualities come
/// from an optional `qualities.txt` (`<file name> <quality>` lines) and
/// default to 1.
pub fn load_mask_dir(dir: &Path) -> Result<BTreeMap<usize, Vec<InstanceMask>>> {
    let mut qualities = BTreeMap::new();
    let qpath = dir.join("qualities.txt");
    if qpath.exists() {
        for line in fs::read_to_string(&qpath)?.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, q) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Malformed(format!("qualities.txt: '{line}'")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("qualities.txt: '{line}'")))?;
            qualities.insert(name.to_string(), q);
        }
    }
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".pgm"))
        .collect();
    names.sort();
    let mut out: BTreeMap<usize, Vec<InstanceMask>> = BTreeMap::new();
    for name in names {
        let (frame, inst, class) =
            parse_mask_name(&name).ok_or_else(|| Error::Malformed(format!("unexpected mask file name '{name}'")))?;
        let (w, h, data) = read_pgm(&dir.join(&name))?;
        let values = data.iter().map(|&b| b as f32 / 255.0).collect();
        let quality = qualities.get(&name).copied().unwrap_or(1.0);
        out.entry(frame)
            .or_default()
            .push(InstanceMask::new(inst, class, quality, w, h, values)?);
    }
    Ok(out)
}

pub fn depth_file_name(frame: usize) -> String {
    format!("frame{frame:05}.depth")
}

pub fn pose_file_name(frame: usize) -> String {
    format!("frame{frame:05}.pose")
}

/// Loads every `frame<t>.depth` in `dir` together with its `frame<t>.pose`
/// sidecar, keyed by frame index.
pub fn load_depth_dir(dir: &Path) -> Result<BTreeMap<usize, DepthFrame>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let Some(t) = name
            .strip_prefix("frame")
            .and_then(|r| r.strip_suffix(".depth"))
            .and_then(|t| t.parse::<usize>().ok())
        else {
            continue;
        };
        out.insert(t, DepthFrame::read(&dir.join(&name), &dir.join(pose_file_name(t)))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftOutput {
    pub cloud: LabeledPointCloud,
    /// Frame indices that passed the keyframe trigger.
    pub keyframes: Vec<usize>,
}

/// Suppresses overlapping masks per frame, picks keyframes by the uncovered
/// ratio trigger and lifts only those frames. Frames without masks count as
/// fully uncovered.
pub fn lift_sequence(
    frames: &BTreeMap<usize, DepthFrame>,
    masks: &BTreeMap<usize, Vec<InstanceMask>>,
    nms_iou: f64,
    keyframe_delta: f64,
) -> Result<LiftOutput> {
    let mut kept = Vec::with_capacity(frames.len());
    for (&t, frame) in frames {
        let m = masks.get(&t).map(Vec::as_slice).unwrap_or(&[]);
        validate_frame_masks(m, frame.width, frame.height)?;
        kept.push((t, mask_nms(m, nms_iou)?));
    }
    let rhos: Vec<f64> = kept
        .iter()
        .map(|(t, m)| uncovered_ratio(m, frames[t].width, frames[t].height))
        .collect();
    let keys = select_keyframes(&rhos, keyframe_delta);
    let mut points = Vec::new();
    for &k in &keys {
        let (t, m) = &kept[k];
        points.extend(assign_labels(&frames[t], m, None)?);
    }
    Ok(LiftOutput {
        cloud: LabeledPointCloud::new(FrameId::Reconstruction, points)?,
        keyframes: keys.iter().map(|&k| kept[k].0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RotationSO3;
    use approx::assert_abs_diff_eq;

    fn unit_k() -> Intrinsics {
        Intrinsics {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    fn frame_with(depth: Vec<f32>, w: usize, h: usize, k: Intrinsics, pose: PoseSE3) -> DepthFrame {
        DepthFrame::new(w, h, depth, k, pose).unwrap()
    }

    fn point_at(f: &DepthFrame, u: usize, v: usize) -> Vec3 {
        unproject(f)
            .pixels
            .into_iter()
            .find(|p| p.u == u && p.v == v)
            .unwrap()
            .point
    }

    #[test]
    fn principal_ray_and_offset_pixel() {
        let f = frame_with(vec![5.0; 12], 4, 3, unit_k(), PoseSE3::identity());
        assert_eq!(point_at(&f, 0, 0), Vec3::new(0.0, 0.0, 5.0));
        let f = frame_with(vec![2.0; 12], 4, 3, unit_k(), PoseSE3::identity());
        assert_eq!(point_at(&f, 2, 1), Vec3::new(4.0, 2.0, 2.0));
    }

    #[test]
    fn translation_convention_golden() {
        let pose = PoseSE3::from_translation(Vec3::new(0.0, 0.0, -1.0));
        let f = frame_with(vec![5.0; 4], 2, 2, unit_k(), pose);
        assert_eq!(point_at(&f, 0, 0), Vec3::new(0.0, 0.0, 6.0));
    }

    #[test]
    fn invalid_depth_is_skipped() {
        let f = frame_with(vec![1.0, 0.0, -2.0, f32::NAN], 2, 2, unit_k(), PoseSE3::identity());
        let u = unproject(&f);
        assert_eq!(u.pixels.len(), 1);
        assert_eq!(u.skipped, 3);
    }

    #[test]
    fn projection_round_trip() {
        let k = Intrinsics {
            fx: 300.0,
            fy: 280.0,
            cx: 31.5,
            cy: 23.5,
        };
        let pose = PoseSE3::new(
            RotationSO3::from_axis_angle(&Vec3::new(0.3, 1.0, 0.2), 0.7),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let (w, h) = (64, 48);
        let depth: Vec<f32> = (0..w * h).map(|i| 2.0 + (i % 17) as f32 * 0.37).collect();
        let f = frame_with(depth, w, h, k, pose);
        for px in unproject(&f).pixels {
            let cam = pose.rotation.rotate(&px.point) + pose.translation;
            let u = k.fx * cam.x / cam.z + k.cx;
            let v = k.fy * cam.y / cam.z + k.cy;
            assert!((u - px.u as f64).abs() < 1e-6 && (v - px.v as f64).abs() < 1e-6);
        }
    }

    fn rect(id: u32, q: f64, x0: usize, x1: usize, y0: usize, y1: usize) -> InstanceMask {
        InstanceMask::from_binary(id, id, q, 20, 20, |u, v| (x0..x1).contains(&u) && (y0..y1).contains(&v)).unwrap()
    }

    #[test]
    fn nms_cases() {
        let a = rect(1, 0.9, 0, 10, 0, 10);
        let dup = rect(2, 0.8, 0, 10, 0, 10);
        let kept = mask_nms(&[dup.clone(), a.clone()], 0.5).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].instance_id, 1);

        let far = rect(3, 0.8, 12, 20, 12, 20);
        assert_eq!(mask_nms(&[a.clone(), far], 0.5).unwrap().len(), 2);

        // A: 10x10 = 100 px; B: 100 px overlapping A by 60 px; union 140.
        let b = rect(4, 0.8, 4, 14, 0, 10);
        assert_abs_diff_eq!(mask_iou(&a, &b), 3.0 / 7.0, epsilon = 1e-15);
        assert_eq!(mask_nms(&[a.clone(), b.clone()], 0.5).unwrap().len(), 2);
        let kept = mask_nms(&[b, a], 0.4).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].instance_id, 1);
        assert!(mask_nms(&[], 0.0).is_err());
    }

    #[test]
    fn nms_is_order_independent() {
        let masks: Vec<InstanceMask> = (0..8)
            .map(|i| {
                rect(
                    i,
                    0.1 + 0.1 * i as f64,
                    i as usize,
                    i as usize + 8,
                    2 * (i as usize % 3),
                    12,
                )
            })
            .collect();
        let fwd = mask_nms(&masks, 0.5).unwrap();
        let mut rev = masks.clone();
        rev.reverse();
        assert_eq!(fwd, mask_nms(&rev, 0.5).unwrap());
    }

    #[test]
    fn uncovered_ratio_cases() {
        let full = InstanceMask::from_binary(1, 1, 1.0, 10, 10, |_, _| true).unwrap();
        assert_eq!(uncovered_ratio(&[full], 10, 10), 0.0);
        assert_eq!(uncovered_ratio(&[], 10, 10), 1.0);
        let sixty = InstanceMask::from_binary(1, 1, 1.0, 10, 10, |_, v| v < 6).unwrap();
        assert_abs_diff_eq!(uncovered_ratio(&[sixty], 10, 10), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn uncovered_ratio_non_increasing() {
        let mut masks = Vec::new();
        let mut last = uncovered_ratio(&masks, 20, 20);
        for i in 0..10 {
            masks.push(rect(
                i,
                0.5,
                (i * 3 % 17) as usize,
                (i * 3 % 17 + 4) as usize,
                (i % 5) as usize,
                8,
            ));
            let r = uncovered_ratio(&masks, 20, 20);
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn keyframe_rules() {
        assert!(keyframe_trigger(0.5, 0.1, 0.3));
        assert!(!keyframe_trigger(0.3, 0.3, 1e-9));
        assert!(!keyframe_trigger(0.35, 0.1, 0.25));
        assert_eq!(select_keyframes(&[0.2, 0.3, 0.4, 0.5, 0.1, 0.6], 0.15), vec![0, 2, 5]);
    }

    #[test]
    fn labels_and_ties() {
        let f = frame_with(vec![1.0; 4], 2, 2, unit_k(), PoseSE3::identity());
        let all = InstanceMask::from_binary(5, 2, 0.9, 2, 2, |_, _| true).unwrap();
        let pts = assign_labels(&f, &[all], None).unwrap();
        assert!(pts.iter().all(|p| p.class_id == 2 && p.confidence == 0.9));

        let corner = InstanceMask::from_binary(5, 2, 0.9, 2, 2, |u, v| u == 0 && v == 0).unwrap();
        let pts = assign_labels(&f, &[corner], None).unwrap();
        assert_eq!(pts[3].class_id, UNLABELED);
        assert_eq!(pts[3].confidence, 0.0);

        let m7 = InstanceMask::from_binary(7, 70, 0.5, 2, 2, |_, _| true).unwrap();
        let m3 = InstanceMask::from_binary(3, 30, 0.6, 2, 2, |_, _| true).unwrap();
        let pts = assign_labels(&f, &[m7, m3], None).unwrap();
        assert!(pts.iter().all(|p| p.class_id == 30));
    }

    #[test]
    fn soft_scores_and_depth_confidence() {
        let f = frame_with(vec![1.0; 2], 2, 1, unit_k(), PoseSE3::identity());
        let a = InstanceMask::new(1, 10, 0.8, 2, 1, vec![0.4, 0.9]).unwrap();
        let b = InstanceMask::new(2, 20, 0.6, 2, 1, vec![0.7, 0.2]).unwrap();
        let pts = assign_labels(&f, &[a, b], Some(&[0.5, 1.0])).unwrap();
        assert_eq!(pts[0].class_id, 20);
        assert_abs_diff_eq!(pts[0].confidence, 0.3, epsilon = 1e-12);
        assert_eq!(pts[1].class_id, 10);
    }

    #[test]
    fn cloud_size_counts_valid_pixels() {
        let f1 = frame_with(vec![1.0, 0.0, 2.0, 3.0], 2, 2, unit_k(), PoseSE3::identity());
        let f2 = frame_with(vec![1.0; 6], 3, 2, unit_k(), PoseSE3::identity());
        let cloud = lift_frames(&[(f1, vec![]), (f2, vec![])]).unwrap();
        assert_eq!(cloud.len(), 9);
    }

    fn cloud_of(points: &[(f64, f64, f64, f64)], class: u32) -> LabeledPointCloud {
        LabeledPointCloud::new(
            FrameId::Metric,
            points
                .iter()
                .map(|&(x, y, z, c)| LabeledPoint::new(Vec3::new(x, y, z), class, c))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn target_cases() {
        let one = cloud_of(&[(1.0, 2.0, 3.0, 0.5)], 4);
        let t = extract_target(&one, 4, &TargetOptions::default()).unwrap();
        assert_eq!(t.representative, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(t.method, TargetMethod::Medoid);

        let three = cloud_of(&[(0.0, 0.0, 0.0, 0.8), (1.0, 0.0, 0.0, 0.6), (10.0, 0.0, 0.0, 0.7)], 1);
        let t = extract_target(&three, 1, &TargetOptions::default()).unwrap();
        assert_eq!(t.representative, Vec3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(t.confidence, 0.7, epsilon = 1e-15);

        let two = cloud_of(&[(0.0, 0.0, 0.0, 0.8), (1.0, 0.0, 0.0, 0.6)], 1);
        assert_abs_diff_eq!(
            extract_target(&two, 1, &TargetOptions::default()).unwrap().confidence,
            0.7,
            epsilon = 1e-15
        );
        assert!(matches!(
            extract_target(&two, 9, &TargetOptions::default()),
            Err(Error::ClassAbsent(9))
        ));

        let c = extract_target(
            &three,
            1,
            &TargetOptions {
                force_centroid: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(c.representative, Vec3::new(11.0 / 3.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn sampled_medoid_is_a_member_and_seeded() {
        let pts: Vec<(f64, f64, f64, f64)> = (0..500)
            .map(|i| ((i as f64 * 0.37).sin() * 10.0, (i as f64 * 0.11).cos() * 5.0, 0.0, 0.5))
            .collect();
        let cloud = cloud_of(&pts, 2);
        let opts = TargetOptions {
            medoid_cap: 50,
            seed: 7,
            force_centroid: false,
        };
        let a = extract_target(&cloud, 2, &opts).unwrap();
        let b = extract_target(&cloud, 2, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, TargetMethod::SampledMedoid);
        assert_eq!(a.seed, Some(7));
        assert!(cloud.points.iter().any(|p| p.position == a.representative));
    }

    #[test]
    fn depth_and_mask_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let k = Intrinsics {
            fx: 2.0,
            fy: 3.0,
            cx: 1.0,
            cy: 0.5,
        };
        let pose = PoseSE3::new(RotationSO3::rot_z(0.4), Vec3::new(0.5, 0.0, -1.0));
        let f = frame_with(vec![1.5, 2.5, 0.0, 4.0, 5.0, 6.0], 3, 2, k, pose);
        let (dp, pp) = (dir.path().join("f.depth"), dir.path().join("f.pose"));
        f.write(&dp, &pp).unwrap();
        let back = DepthFrame::read(&dp, &pp).unwrap();
        assert_eq!(back.depth, f.depth);
        assert_eq!(back.intrinsics, k);
        assert!((back.pose.translation - pose.translation).amax() < 1e-8);

        let name = mask_file_name(3, 12, 5);
        assert_eq!(name, "frame00003_inst0012_class5.pgm");
        assert_eq!(parse_mask_name(&name), Some((3, 12, 5)));
        write_pgm(&dir.path().join(&name), 3, 2, &[0, 255, 255, 0, 0, 255]).unwrap();
        fs::write(dir.path().join("qualities.txt"), format!("{name} 0.75\n")).unwrap();
        let masks = load_mask_dir(dir.path()).unwrap();
        let m = &masks[&3][0];
        assert_eq!((m.instance_id, m.class_id, m.quality), (12, 5, 0.75));
        assert_eq!(m.area(), 3);
    }

    #[test]
    fn sequence_uses_keyframes_only() {
        let dir = tempfile::tempdir().unwrap();
        let k = unit_k();
        for t in 0..3 {
            let pose = PoseSE3::from_translation(Vec3::new(t as f64, 0.0, 0.0));
            frame_with(vec![1.0; 16], 4, 4, k, pose)
                .write(
                    &dir.path().join(depth_file_name(t)),
                    &dir.path().join(pose_file_name(t)),
                )
                .unwrap();
        }
        let frames = load_depth_dir(dir.path()).unwrap();
        assert_eq!(frames.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        // Frame 1 covers 3/4 of the image, so it does not trigger; frame 2 has
        // no masks and does.
        let mut masks = BTreeMap::new();
        masks.insert(
            0,
            vec![InstanceMask::from_binary(1, 2, 0.9, 4, 4, |u, _| u < 1).unwrap()],
        );
        masks.insert(
            1,
            vec![
                InstanceMask::from_binary(1, 2, 0.9, 4, 4, |u, _| u < 3).unwrap(),
                InstanceMask::from_binary(2, 3, 0.5, 4, 4, |u, _| u < 3).unwrap(),
            ],
        );
        let out = lift_sequence(&frames, &masks, 0.5, DEFAULT_KEYFRAME_DELTA).unwrap();
        assert_eq!(out.keyframes, vec![0, 2]);
        assert_eq!(out.cloud.len(), 32);
        assert_eq!(out.cloud.class_points(2).count(), 4);
    }
}
