//! Timestamped pose sequences and the plain-text trajectory format
//! (`timestamp tx ty tz qx qy qz qw` per line, `#` comments).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::geom::{PoseSE3, RotationSO3, Sim3Transform, Vec3};

/// Significant digits used when writing trajectory files.
pub const TRAJECTORY_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameId {
    #[default]
    Reconstruction,
    Metric,
}

impl FrameId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameId::Reconstruction => "reconstruction",
            FrameId::Metric => "metric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reconstruction" => Some(FrameId::Reconstruction),
            "metric" => Some(FrameId::Metric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: PoseSE3,
}

/// Poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frame: FrameId,
    poses: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new(frame: FrameId, poses: Vec<StampedPose>) -> Result<Self> {
        for w in poses.windows(2) {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(Error::Malformed(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].timestamp
                )));
            }
        }
        if poses.iter().any(|p| !p.timestamp.is_finite()) {
            return Err(Error::Malformed("non-finite timestamp".into()));
        }
        Ok(Self { frame, poses })
    }

    /// Trajectory with identity rotations at the given positions, stamped
    /// `0, dt, 2·dt, ...`.
    pub fn from_positions(frame: FrameId, positions: &[Vec3], dt: f64) -> Result<Self> {
        let poses = positions
            .iter()
            .enumerate()
            .map(|(i, p)| StampedPose {
                timestamp: i as f64 * dt,
                pose: PoseSE3::from_translation(*p),
            })
            .collect();
        Self::new(frame, poses)
    }

    pub fn frame(&self) -> FrameId {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[StampedPose] {
        &self.poses
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.poses.iter().map(|p| p.pose.translation).collect()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.timestamp).collect()
    }

    /// Applies `t` to every pose and tags the result with `frame`.
    pub fn transformed(&self, t: &Sim3Transform, frame: FrameId) -> Trajectory {
        Trajectory {
            frame,
            poses: self
                .poses
                .iter()
                .map(|p| StampedPose {
                    timestamp: p.timestamp,
                    pose: t.apply_pose(&p.pose),
                })
                .collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Trajectory {
        Trajectory {
            frame: self.frame,
            poses: indices.iter().map(|&i| self.poses[i]).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# frame: {}\n# timestamp tx ty tz qx qy qz qw\n", self.frame.as_str());
        for p in &self.poses {
            let t = &p.pose.translation;
            let q = p.pose.rotation.to_quaternion();
            let fields = [p.timestamp, t.x, t.y, t.z, q[0], q[1], q[2], q[3]];
            let line: Vec<String> = fields.iter().map(|v| sig(*v, TRAJECTORY_DIGITS)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the text format. A `# frame: <id>` comment sets the frame tag,
    /// which otherwise defaults to `default_frame`.
    pub fn parse(text: &str, default_frame: FrameId) -> Result<Self> {
        let mut frame = default_frame;
        let mut poses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("frame:") {
                    frame = FrameId::parse(tag.trim()).ok_or_else(|| {
                        Error::Malformed(format!("line {}: unknown frame '{}'", lineno + 1, tag.trim()))
                    })?;
                }
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 8 {
                return Err(Error::Malformed(format!(
                    "line {}: expected 8 fields, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            let rotation = RotationSO3::from_quaternion(vals[4], vals[5], vals[6], vals[7])
                .map_err(|e| Error::Malformed(format!("line {}: {e}", lineno + 1)))?;
            poses.push(StampedPose {
                timestamp: vals[0],
                pose: PoseSE3::new(rotation, Vec3::new(vals[1], vals[2], vals[3])),
            });
        }
        Self::new(frame, poses)
    }

    pub fn read(path: &Path, default_frame: FrameId) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, default_frame)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let poses = (0..5)
            .map(|i| StampedPose {
                timestamp: 0.1 * i as f64,
                pose: PoseSE3::new(
                    RotationSO3::from_axis_angle(&Vec3::new(0.3, 1.0, -0.2), 0.4 * i as f64),
                    Vec3::new(i as f64 * 1.2345678912, -2.0, 10.0 / 3.0),
                ),
            })
            .collect();
        Trajectory::new(FrameId::Metric, poses).unwrap()
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        let p = StampedPose {
            timestamp: 1.0,
            pose: PoseSE3::identity(),
        };
        assert!(Trajectory::new(FrameId::Metric, vec![p, p]).is_err());
    }

    #[test]
    fn text_round_trip_is_stable() {
        let text = sample().to_text();
        let back = Trajectory::parse(&text, FrameId::Reconstruction).unwrap();
        assert_eq!(back.frame(), FrameId::Metric);
        assert_eq!(back.len(), 5);
        assert_eq!(back.to_text(), text);
        for (a, b) in back.poses().iter().zip(sample().poses()) {
            assert!((a.pose.translation - b.pose.translation).amax() < 1e-8);
            assert!(a.pose.rotation.angle_to(&b.pose.rotation) < 1e-8);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(Trajectory::parse("0 1 2 3 0 0 0\n", FrameId::Metric).is_err());
        assert!(Trajectory::parse("0 1 2 3 0 0 0 5\n", FrameId::Metric).is_err());
        assert!(Trajectory::parse("0 1 2 x 0 0 0 1\n", FrameId::Metric).is_err());
        let ok = Trajectory::parse("# c\n\n0 1 2 3 0 0 0 1\n1 1 2 3 0 0 0 1\n", FrameId::Metric);
        assert_eq!(ok.unwrap().len(), 2);
    }
}
