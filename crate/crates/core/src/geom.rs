//! Geometric value types: points, rotations, rigid poses and similarity transforms.
//!
//! Rotations are stored as 3x3 matrices. Quaternions `(qx, qy, qz, qw)` only
//! appear when reading or writing trajectory files.

use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, SVD};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Per-entry tolerance for `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOL: f64 = 1e-9;
/// Largest per-entry correction accepted when repairing a loaded rotation.
pub const REPAIR_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSO3(Matrix3<f64>);

impl Default for RotationSO3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationSO3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and orientation without modifying the matrix.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite()) || err > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Malformed(format!(
                "not a rotation (orthonormality error {err:.3e}, det {det})"
            )));
        }
        Ok(Self(m))
    }

    /// Projects `m` onto the nearest rotation (polar decomposition). Inputs
    /// that need a per-entry correction above [`REPAIR_TOL`] are rejected.
    pub fn from_matrix_repaired(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Malformed("non-finite rotation entry".into()));
        }
        let r = nearest_rotation(&m);
        let change = (r - m).amax();
        if change > REPAIR_TOL {
            return Err(Error::Malformed(format!(
                "rotation needs correction {change:.3e} > {REPAIR_TOL}"
            )));
        }
        Ok(Self(r))
    }

    /// Builds a rotation from a `(qx, qy, qz, qw)` quaternion. The norm must be
    /// within [`REPAIR_TOL`] of one.
    pub fn from_quaternion(qx: f64, qy: f64, qz: f64, qw: f64) -> Result<Self> {
        let q = Quaternion::new(qw, qx, qy, qz);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > REPAIR_TOL {
            return Err(Error::Malformed(format!("quaternion norm {norm} is not 1")));
        }
        let unit = UnitQuaternion::from_quaternion(q);
        Self::from_matrix_repaired(*unit.to_rotation_matrix().matrix())
    }

    /// Returns `(qx, qy, qz, qw)` with `qw >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.0);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let (x, y, z, w) = (q.i, q.j, q.k, q.w);
        if w < 0.0 {
            [-x, -y, -z, -w]
        } else {
            [x, y, z, w]
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Rotation angle in radians, `[0, π]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let cos = (m.trace() - 1.0) * 0.5;
        let sin = 0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
        sin.atan2(cos)
    }

    /// Angle of `self⁻¹ · other`.
    pub fn angle_to(&self, other: &RotationSO3) -> f64 {
        (self.inverse() * *other).angle()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl Mul for RotationSO3 {
    type Output = RotationSO3;

    fn mul(self, rhs: RotationSO3) -> RotationSO3 {
        RotationSO3(self.0 * rhs.0)
    }
}

/// Nearest rotation in the Frobenius sense, `U·diag(1,1,±1)·Vᵀ`.
pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Rigid pose in camera-to-world convention.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseSE3 {
    pub rotation: RotationSO3,
    pub translation: Vec3,
}

impl PoseSE3 {
    pub fn new(rotation: RotationSO3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(RotationSO3::identity(), translation)
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Self::new(r_inv, -r_inv.rotate(&self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }
}

impl Mul for PoseSE3 {
    type Output = PoseSE3;

    fn mul(self, rhs: PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            self.rotation * rhs.rotation,
            self.rotation.rotate(&rhs.translation) + self.translation,
        )
    }
}

/// Similarity transform `p ↦ s·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3Transform {
    scale: f64,
    pub rotation: RotationSO3,
    pub translation: Vec3,
}

impl Default for Sim3Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Sim3Transform {
    pub fn new(scale: f64, rotation: RotationSO3, translation: Vec3) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Malformed(format!("similarity scale {scale} must be positive")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Malformed("non-finite translation".into()));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: RotationSO3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.rotate(p) + self.translation
    }

    /// Maps a camera-to-world pose: `R' = R·R_wc`, `t' = s·R·t_wc + t`.
    pub fn apply_pose(&self, pose: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(self.rotation * pose.rotation, self.apply_point(&pose.translation))
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &Sim3Transform) -> Sim3Transform {
        Sim3Transform {
            scale: self.scale * first.scale,
            rotation: self.rotation * first.rotation,
            translation: self.scale * self.rotation.rotate(&first.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Sim3Transform {
        let r_inv = self.rotation.inverse();
        let s_inv = 1.0 / self.scale;
        Sim3Transform {
            scale: s_inv,
            rotation: r_inv,
            translation: -s_inv * r_inv.rotate(&self.translation),
        }
    }
}

pub fn apply_sim3_point(t: &Sim3Transform, p: &Vec3) -> Vec3 {
    t.apply_point(p)
}

pub fn apply_sim3_pose(t: &Sim3Transform, pose: &PoseSE3) -> PoseSE3 {
    t.apply_pose(pose)
}
