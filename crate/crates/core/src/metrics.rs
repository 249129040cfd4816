//! Trajectory accuracy: absolute trajectory error after similarity alignment
//! and relative pose error over a fixed frame offset.
//!
//! Both statistics are root-mean-square. Rotation errors are in degrees.
//! Trajectories of equal length are compared index by index; otherwise poses
//! are paired by nearest timestamp (see [`associate`]).

use crate::align::umeyama;
use crate::error::{Error, Result};
use crate::geom::{PoseSE3, Sim3Transform};
use crate::trajectory::Trajectory;

/// Least-squares similarity mapping `est` positions onto `gt` positions.
pub fn umeyama_align(gt: &Trajectory, est: &Trajectory) -> Result<Sim3Transform> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch(gt.len(), est.len()));
    }
    if gt.len() < 3 {
        return Err(Error::TooShort(format!("alignment needs 3 poses, have {}", gt.len())));
    }
    let fit = umeyama(&est.positions(), &gt.positions(), true)?;
    Sim3Transform::new(fit.scale, fit.rotation, fit.translation)
}

/// Position RMSE of `est` after mapping it through `align`.
pub fn ate_with(gt: &Trajectory, est: &Trajectory, align: &Sim3Transform) -> Result<f64> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch(gt.len(), est.len()));
    }
    if gt.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let sum: f64 = gt
        .positions()
        .iter()
        .zip(est.positions())
        .map(|(g, e)| (g - align.apply_point(&e)).norm_squared())
        .sum();
    Ok((sum / gt.len() as f64).sqrt())
}

/// Absolute trajectory error (meters) after [`umeyama_align`].
pub fn ate(gt: &Trajectory, est: &Trajectory) -> Result<f64> {
    let align = umeyama_align(gt, est)?;
    ate_with(gt, est, &align)
}

/// Relative pose error with `est` translations multiplied by `scale`.
/// Returns `(translation RMSE, rotation RMSE in degrees)`.
pub fn rpe_scaled(gt: &Trajectory, est: &Trajectory, delta: usize, scale: f64) -> Result<(f64, f64)> {
    if gt.len() != est.len() {
        return Err(Error::LengthMismatch(gt.len(), est.len()));
    }
    if delta == 0 || gt.len() <= delta {
        return Err(Error::TooShort(format!(
            "RPE needs more than delta={delta} poses, have {}",
            gt.len()
        )));
    }
    let scaled = |p: &PoseSE3| PoseSE3::new(p.rotation, scale * p.translation);
    let g = gt.poses();
    let e = est.poses();
    let n = g.len() - delta;
    let (mut trans_sq, mut rot_sq) = (0.0, 0.0);
    for i in 0..n {
        let q = g[i].pose.inverse() * g[i + delta].pose;
        let p = scaled(&e[i].pose).inverse() * scaled(&e[i + delta].pose);
        let err = q.inverse() * p;
        trans_sq += err.translation.norm_squared();
        rot_sq += err.rotation.angle().to_degrees().powi(2);
    }
    Ok(((trans_sq / n as f64).sqrt(), (rot_sq / n as f64).sqrt()))
}

/// Relative pose error; `est` is first corrected by the global scale of
/// [`umeyama_align`].
pub fn rpe(gt: &Trajectory, est: &Trajectory, delta: usize) -> Result<(f64, f64)> {
    let scale = umeyama_align(gt, est)?.scale();
    rpe_scaled(gt, est, delta, scale)
}

/// Index pairs `(gt, est)`. Equal-length trajectories pair by index;
/// otherwise each est pose takes the nearest unused gt timestamp within half
/// the median gt frame interval. Returns the pairs and the number of poses
/// (from either side) left unmatched.
pub fn associate(gt: &Trajectory, est: &Trajectory) -> (Vec<(usize, usize)>, usize) {
    if gt.len() == est.len() {
        return ((0..gt.len()).map(|i| (i, i)).collect(), 0);
    }
    let gts = gt.timestamps();
    let mut intervals: Vec<f64> = gts.windows(2).map(|w| w[1] - w[0]).collect();
    if intervals.is_empty() {
        return (Vec::new(), gt.len() + est.len());
    }
    intervals.sort_by(f64::total_cmp);
    let tol = 0.5 * intervals[intervals.len() / 2];
    let mut used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (j, t) in est.timestamps().iter().enumerate() {
        let idx = gts.partition_point(|g| g < t);
        let best = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < gts.len() && !used[i])
            .min_by(|&a, &b| (gts[a] - t).abs().total_cmp(&(gts[b] - t).abs()));
        if let Some(i) = best {
            if (gts[i] - t).abs() <= tol {
                used[i] = true;
                pairs.push((i, j));
            }
        }
    }
    let unmatched = gt.len() + est.len() - 2 * pairs.len();
    (pairs, unmatched)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryErrorReport {
    pub ate_rmse: f64,
    pub rpe_trans_rmse: f64,
    pub rpe_rot_rmse: f64,
    pub n_poses: usize,
    pub unmatched: usize,
    pub delta: usize,
    /// Scale of the alignment applied to `est`.
    pub align_scale: f64,
}

impl TrajectoryErrorReport {
    pub fn to_text(&self) -> String {
        format!(
            "# ate: rmse after sim3 alignment; rpe: rmse, delta={}, translation scale-corrected, rotation in degrees\n\
             ate_rmse: {:.6}\nrpe_trans_rmse: {:.6}\nrpe_rot_rmse: {:.6}\nn_poses: {}\nunmatched: {}\nalign_scale: {:.9}\n",
            self.delta,
            self.ate_rmse,
            self.rpe_trans_rmse,
            self.rpe_rot_rmse,
            self.n_poses,
            self.unmatched,
            self.align_scale
        )
    }
}

pub fn evaluate_trajectory(gt: &Trajectory, est: &Trajectory, delta: usize) -> Result<TrajectoryErrorReport> {
    let (pairs, unmatched) = associate(gt, est);
    let gt_idx: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let est_idx: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let (gt, est) = (gt.subset(&gt_idx), est.subset(&est_idx));
    let align = umeyama_align(&gt, &est)?;
    let (rpe_trans_rmse, rpe_rot_rmse) = rpe_scaled(&gt, &est, delta, align.scale())?;
    Ok(TrajectoryErrorReport {
        ate_rmse: ate_with(&gt, &est, &align)?,
        rpe_trans_rmse,
        rpe_rot_rmse,
        n_poses: gt.len(),
        unmatched,
        delta,
        align_scale: align.scale(),
    })
}
