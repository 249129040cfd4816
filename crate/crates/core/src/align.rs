//! Closed-form least-squares similarity between corresponding point sets
//! (Umeyama's method).

use nalgebra::{Matrix3, SVD};

use crate::error::{Error, Result};
use crate::geom::{RotationSO3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityFit {
    pub scale: f64,
    pub rotation: RotationSO3,
    /// Zero when the fit was run without centering.
    pub translation: Vec3,
    /// Singular values of the cross-covariance, descending.
    pub singular_values: [f64; 3],
    /// Mean squared norm of the (centered) source set.
    pub source_variance: f64,
}

/// Finds `(s, R, t)` minimizing `Σ‖dst_i − (s·R·src_i + t)‖²`.
///
/// With `centered == false` the translation is fixed to zero and the sets are
/// used as given, which is the exact minimizer of `Σ‖dst_i − s·R·src_i‖²`.
pub fn umeyama(src: &[Vec3], dst: &[Vec3], centered: bool) -> Result<SimilarityFit> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch(src.len(), dst.len()));
    }
    if src.is_empty() {
        return Err(Error::InsufficientPairs { have: 0, need: 1 });
    }
    let n = src.len() as f64;
    let (mu_src, mu_dst) = if centered {
        (src.iter().sum::<Vec3>() / n, dst.iter().sum::<Vec3>() / n)
    } else {
        (Vec3::zeros(), Vec3::zeros())
    };

    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_src;
        let dc = d - mu_dst;
        cov += dc * sc.transpose();
        var_src += sc.norm_squared();
    }
    cov /= n;
    var_src /= n;
    if !(var_src > 0.0) || !var_src.is_finite() {
        return Err(Error::DegenerateMotion("source points have no spread".into()));
    }

    let svd = SVD::new(cov, true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = svd.singular_values;

    // Flip the axis of the smallest singular value when U·Vᵀ is a reflection.
    let mut signs = Vec3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        signs[order[2]] = -1.0;
    }
    let rot = u * Matrix3::from_diagonal(&signs) * v_t;
    let trace: f64 = (0..3).map(|i| sv[i] * signs[i]).sum();
    let scale = trace / var_src;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateMotion(format!("non-positive scale {scale}")));
    }
    let rotation = RotationSO3::from_matrix_repaired(rot)?;
    let translation = mu_dst - scale * rotation.rotate(&mu_src);
    Ok(SimilarityFit {
        scale,
        rotation,
        translation,
        singular_values: [sv[order[0]], sv[order[1]], sv[order[2]]],
        source_variance: var_src,
    })
}
