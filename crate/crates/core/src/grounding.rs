//! Metric grounding of a scale-ambiguous reconstruction from platform egomotion.
//!
//! Camera centers predicted in the reconstruction frame are matched to the
//! platform's metric positions through inter-frame displacements at several
//! temporal strides. A closed-form similarity fit on those displacements gives
//! scale and rotation; translation comes from anchoring the first frame.

use crate::align::umeyama;
use crate::cloud::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::geom::{RotationSO3, Sim3Transform, Vec3};
use crate::trajectory::{FrameId, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingConfig {
    pub strides: Vec<usize>,
    pub min_pairs: usize,
    pub degenerate_ratio_tol: f64,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            strides: vec![1, 2, 4, 8],
            min_pairs: 3,
            degenerate_ratio_tol: 1e-6,
        }
    }
}

impl GroundingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strides.is_empty() || self.strides.contains(&0) {
            return Err(Error::ConfigInvalid("strides must be non-empty and >= 1".into()));
        }
        if self.min_pairs == 0 {
            return Err(Error::ConfigInvalid("min_pairs must be >= 1".into()));
        }
        if !(self.degenerate_ratio_tol > 0.0 && self.degenerate_ratio_tol.is_finite()) {
            return Err(Error::ConfigInvalid("degenerate_ratio_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Matched displacements `(Δv, Δp)` over identical index spans.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisplacementPairs {
    pub reconstruction: Vec<Vec3>,
    pub metric: Vec<Vec3>,
    /// Stride that produced each pair.
    pub strides: Vec<usize>,
}

impl DisplacementPairs {
    pub fn len(&self) -> usize {
        self.reconstruction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reconstruction.is_empty()
    }

    /// `Σ‖Δp − s·R·Δv‖²`.
    pub fn residual(&self, scale: f64, rotation: &RotationSO3) -> f64 {
        self.reconstruction
            .iter()
            .zip(&self.metric)
            .map(|(v, p)| (p - scale * rotation.rotate(v)).norm_squared())
            .sum()
    }
}

pub fn relative_displacements(
    traj_v: &Trajectory,
    traj_p: &Trajectory,
    cfg: &GroundingConfig,
) -> Result<DisplacementPairs> {
    cfg.validate()?;
    if traj_v.len() != traj_p.len() {
        return Err(Error::LengthMismatch(traj_v.len(), traj_p.len()));
    }
    let n = traj_v.len();
    let cv = traj_v.positions();
    let cp = traj_p.positions();
    let mut pairs = DisplacementPairs::default();
    for &k in cfg.strides.iter().filter(|&&k| k < n) {
        for i in 0..n - k {
            pairs.reconstruction.push(cv[i + k] - cv[i]);
            pairs.metric.push(cp[i + k] - cp[i]);
            pairs.strides.push(k);
        }
    }
    if pairs.is_empty() {
        return Err(Error::TooShort(format!(
            "{n} poses leave no room for strides {:?}",
            cfg.strides
        )));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementFit {
    pub scale: f64,
    pub rotation: RotationSO3,
    /// `Σ‖Δp − s·R·Δv‖²` at the optimum.
    pub residual: f64,
    pub n_pairs: usize,
    /// Reconstruction displacements span a single direction; rotation about
    /// that direction is unconstrained.
    pub collinear: bool,
}

/// Closed-form `(s, R) = argmin Σ‖Δp − s·R·Δv‖²`.
pub fn fit_sim3_displacements(pairs: &DisplacementPairs, cfg: &GroundingConfig) -> Result<DisplacementFit> {
    cfg.validate()?;
    if pairs.len() < cfg.min_pairs {
        return Err(Error::InsufficientPairs {
            have: pairs.len(),
            need: cfg.min_pairs,
        });
    }
    let n = pairs.len() as f64;
    let mean_norm = pairs.reconstruction.iter().map(|v| v.norm()).sum::<f64>() / n;
    let second_moment = pairs
        .reconstruction
        .iter()
        .fold(nalgebra::Matrix3::zeros(), |acc, v| acc + v * v.transpose())
        / n;
    let sv = second_moment.singular_values();
    let largest = sv.max();
    if !(largest > 0.0) || largest < cfg.degenerate_ratio_tol * mean_norm {
        return Err(Error::DegenerateMotion(format!(
            "reconstruction displacements too small (largest singular value {largest:.3e})"
        )));
    }
    let second = {
        let mut s = [sv[0], sv[1], sv[2]];
        s.sort_by(|a, b| b.total_cmp(a));
        s[1]
    };

    let fit = umeyama(&pairs.reconstruction, &pairs.metric, false)?;
    Ok(DisplacementFit {
        scale: fit.scale,
        rotation: fit.rotation,
        residual: pairs.residual(fit.scale, &fit.rotation),
        n_pairs: pairs.len(),
        collinear: second <= 1e-12 * largest,
    })
}

/// `t = C₀ᵖ − s·R·C₀ᵛ`.
pub fn anchor_translation(
    scale: f64,
    rotation: &RotationSO3,
    traj_v: &Trajectory,
    traj_p: &Trajectory,
) -> Result<Vec3> {
    let (Some(v0), Some(p0)) = (traj_v.poses().first(), traj_p.poses().first()) else {
        return Err(Error::EmptyTrajectory);
    };
    Ok(p0.pose.translation - scale * rotation.rotate(&v0.pose.translation))
}

/// Maps every pose and point through `t`; labels and confidences are kept.
pub fn ground(traj_v: &Trajectory, cloud: &LabeledPointCloud, t: &Sim3Transform) -> (Trajectory, LabeledPointCloud) {
    (
        traj_v.transformed(t, FrameId::Metric),
        cloud.transformed(t, FrameId::Metric),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingResult {
    pub transform: Sim3Transform,
    pub fit: DisplacementFit,
}

/// Displacements, fit and anchoring in one call.
pub fn estimate_grounding(traj_v: &Trajectory, traj_p: &Trajectory, cfg: &GroundingConfig) -> Result<GroundingResult> {
    let pairs = relative_displacements(traj_v, traj_p, cfg)?;
    let fit = fit_sim3_displacements(&pairs, cfg)?;
    let t = anchor_translation(fit.scale, &fit.rotation, traj_v, traj_p)?;
    Ok(GroundingResult {
        transform: Sim3Transform::new(fit.scale, fit.rotation, t)?,
        fit,
    })
}
