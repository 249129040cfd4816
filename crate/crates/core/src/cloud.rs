//! Labeled point clouds and their text format (`x y z class confidence`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::geom::{Sim3Transform, Vec3};
use crate::trajectory::FrameId;

/// Class id reserved for points not covered by any mask.
pub const UNLABELED: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec3,
    pub class_id: u32,
    /// In `[0, 1]`.
    pub confidence: f64,
}

impl LabeledPoint {
    pub fn new(position: Vec3, class_id: u32, confidence: f64) -> Self {
        Self {
            position,
            class_id,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub frame: FrameId,
    pub points: Vec<LabeledPoint>,
}

impl LabeledPointCloud {
    pub fn new(frame: FrameId, points: Vec<LabeledPoint>) -> Result<Self> {
        for p in &points {
            if !(0.0..=1.0).contains(&p.confidence) {
                return Err(Error::Malformed(format!("confidence {} outside [0, 1]", p.confidence)));
            }
            if !p.position.iter().all(|v| v.is_finite()) {
                return Err(Error::Malformed("non-finite point".into()));
            }
        }
        Ok(Self { frame, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn class_points(&self, class_id: u32) -> impl Iterator<Item = &LabeledPoint> {
        self.points.iter().filter(move |p| p.class_id == class_id)
    }

    pub fn transformed(&self, t: &Sim3Transform, frame: FrameId) -> LabeledPointCloud {
        LabeledPointCloud {
            frame,
            points: self
                .points
                .iter()
                .map(|p| LabeledPoint {
                    position: t.apply_point(&p.position),
                    ..*p
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# frame: {}\n# x y z class confidence\n", self.frame.as_str());
        for p in &self.points {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                sig(p.position.x, 9),
                sig(p.position.y, 9),
                sig(p.position.z, 9),
                p.class_id,
                sig(p.confidence, 9)
            );
        }
        out
    }

    pub fn parse(text: &str, default_frame: FrameId) -> Result<Self> {
        let mut frame = default_frame;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("frame:") {
                    frame = FrameId::parse(tag.trim())
                        .ok_or_else(|| Error::Malformed(format!("unknown frame '{}'", tag.trim())))?;
                }
                continue;
            }
            let bad = |what: &str| Error::Malformed(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(bad("expected `x y z class confidence`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(&e.to_string()));
            points.push(LabeledPoint {
                position: Vec3::new(num(fields[0])?, num(fields[1])?, num(fields[2])?),
                class_id: fields[3].parse().map_err(|_| bad("bad class id"))?,
                confidence: num(fields[4])?,
            });
        }
        Self::new(frame, points)
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

    #[test]
    fn text_round_trip() {
        let cloud = LabeledPointCloud::new(
            FrameId::Metric,
            vec![
                LabeledPoint::new(Vec3::new(1.0, -2.5, 0.125), 3, 0.9),
                LabeledPoint::new(Vec3::new(1e-7, 4.0, 1.0 / 3.0), 0, 0.0),
            ],
        )
        .unwrap();
        let text = cloud.to_text();
        let back = LabeledPointCloud::parse(&text, FrameId::Reconstruction).unwrap();
        assert_eq!(back.frame, FrameId::Metric);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.points[0], cloud.points[0]);
    }

    #[test]
    fn rejects_bad_confidence() {
        assert!(LabeledPointCloud::parse("0 0 0 1 1.5\n", FrameId::Metric).is_err());
        assert!(LabeledPointCloud::parse("0 0 0 -1 0.5\n", FrameId::Metric).is_err());
    }
}
