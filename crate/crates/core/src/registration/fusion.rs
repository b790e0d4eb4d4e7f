use nalgebra::{Rotation3, UnitQuaternion, SVD};
use serde::{Deserialize, Serialize};

use crate::geometry::{Mat3, RigidTransform};
use crate::{Error, Result};

/// How the two rotation estimates are blended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Weighted average of sign-aligned unit quaternions, renormalised.
    #[default]
    Quaternion,
    /// Weighted sum of the rotation matrices projected back onto SO(3).
    BlendProject,
}

/// Result of [`fuse_transforms`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fusion {
    pub transform: RigidTransform,
    pub lambda: f64,
    /// Set when both inlier ratios were zero and the skeleton estimate was
    /// returned unchanged.
    pub no_inliers: bool,
}

fn check_ratio(name: &str, g: f64) -> Result<()> {
    if (0.0..=1.0).contains(&g) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {g}")))
    }
}

fn quaternion(r: &Mat3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r))
}

/// Nearest rotation to `m` in the Frobenius sense.
fn project_to_rotation(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let k = svd.singular_values.imin();
        let mut u = u;
        u.column_mut(k).neg_mut();
        r = u * v_t;
    }
    r
}

/// Blends the raw-cloud estimate `tf_c` and the skeleton estimate `tf_s`
/// with `λ = γ_c / (γ_c + γ_s)`: translations linearly, rotations as chosen
/// by `mode`. At `λ = 1` or `λ = 0` the corresponding input is returned as
/// is. When both ratios are zero the skeleton estimate is returned and
/// flagged.
pub fn fuse_transforms(
    tf_c: &RigidTransform,
    tf_s: &RigidTransform,
    gamma_c: f64,
    gamma_s: f64,
    mode: FusionMode,
) -> Result<Fusion> {
    check_ratio("gamma_c", gamma_c)?;
    check_ratio("gamma_s", gamma_s)?;
    let denom = gamma_c + gamma_s;
    if denom == 0.0 {
        return Ok(Fusion {
            transform: *tf_s,
            lambda: 0.0,
            no_inliers: true,
        });
    }
    let lambda = gamma_c / denom;
    let done = |transform: RigidTransform| Fusion {
        transform,
        lambda,
        no_inliers: false,
    };
    if lambda == 1.0 {
        return Ok(done(*tf_c));
    }
    if lambda == 0.0 {
        return Ok(done(*tf_s));
    }
    let translation = tf_c.translation() * lambda + tf_s.translation() * (1.0 - lambda);
    let rotation = match mode {
        FusionMode::Quaternion => {
            let qc = quaternion(tf_c.rotation());
            let mut qs = quaternion(tf_s.rotation()).into_inner();
            if qc.coords.dot(&qs.coords) < 0.0 {
                qs = -qs;
            }
            let q = UnitQuaternion::new_normalize(qc.into_inner() * lambda + qs * (1.0 - lambda));
            q.to_rotation_matrix().into_inner()
        }
        FusionMode::BlendProject => {
            project_to_rotation(&(tf_c.rotation() * lambda + tf_s.rotation() * (1.0 - lambda)))
        }
    };
    Ok(done(RigidTransform::from_parts_unchecked(rotation, translation)))
}
