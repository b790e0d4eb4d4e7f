use serde::{Deserialize, Serialize};

use super::{Mat3, RigidTransform, Vec3};

/// Pitch values closer than this (radians) to ±90° are reported as gimbal lock.
const GIMBAL_TOLERANCE: f64 = 1e-6;

/// Per-axis absolute Euler angle errors in degrees, ordered (z, y, x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationError {
    pub angles: [f64; 3],
    pub gimbal_lock: bool,
}

/// Intrinsic z-y-x decomposition `R = Rz(yaw) Ry(pitch) Rx(roll)`.
fn euler_zyx(r: &Mat3) -> ([f64; 3], bool) {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let locked = (pitch.abs() - std::f64::consts::FRAC_PI_2).abs() < GIMBAL_TOLERANCE;
    if locked {
        // yaw and roll are coupled; attribute the whole angle to yaw
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        ([yaw, pitch, 0.0], true)
    } else {
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        ([yaw, pitch, roll], false)
    }
}

/// Euler angle error of `estimated` against `ground_truth`.
///
/// The residual rotation `R_est · R_gtᵀ` is decomposed, which makes the
/// error zero exactly when the rotations agree and invariant to a common
/// right factor applied to both. Each angle is reported as an absolute value
/// in `[0°, 180°]`.
pub fn rotation_error_degrees(estimated: &RigidTransform, ground_truth: &RigidTransform) -> RotationError {
    let residual = estimated.rotation() * ground_truth.rotation().transpose();
    let (angles, gimbal_lock) = euler_zyx(&residual);
    RotationError {
        angles: angles.map(|a| a.to_degrees().abs().min(180.0)),
        gimbal_lock,
    }
}

/// Per-axis absolute translation differences.
pub fn translation_error(estimated: &RigidTransform, ground_truth: &RigidTransform) -> [f64; 3] {
    let d: Vec3 = estimated.translation() - ground_truth.translation();
    [d.x.abs(), d.y.abs(), d.z.abs()]
}

/// MSE, RMSE and MAE pooled over the three axes and all trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse_r: f64,
    pub rmse_r: f64,
    pub mae_r: f64,
    pub mse_t: f64,
    pub rmse_t: f64,
    pub mae_t: f64,
    pub trials: usize,
}

impl ErrorMetrics {
    /// Aggregates per-trial rotation (degrees) and translation errors.
    /// With no trials every statistic is NaN.
    pub fn from_errors(rotation: &[[f64; 3]], translation: &[[f64; 3]]) -> Self {
        let (mse_r, mae_r) = pooled(rotation);
        let (mse_t, mae_t) = pooled(translation);
        Self {
            mse_r,
            rmse_r: mse_r.sqrt(),
            mae_r,
            mse_t,
            rmse_t: mse_t.sqrt(),
            mae_t,
            trials: rotation.len().max(translation.len()),
        }
    }

    pub fn from_transforms(pairs: &[(RigidTransform, RigidTransform)]) -> Self {
        let rot: Vec<[f64; 3]> = pairs
            .iter()
            .map(|(e, g)| rotation_error_degrees(e, g).angles)
            .collect();
        let trans: Vec<[f64; 3]> = pairs.iter().map(|(e, g)| translation_error(e, g)).collect();
        Self::from_errors(&rot, &trans)
    }
}

fn pooled(errors: &[[f64; 3]]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = (errors.len() * 3) as f64;
    let (sq, abs) = errors
        .iter()
        .flatten()
        .fold((0.0, 0.0), |(sq, abs), e| (sq + e * e, abs + e.abs()));
    (sq / n, abs / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(axis: Vec3, deg: f64) -> RigidTransform {
        RigidTransform::from_axis_angle(axis, deg.to_radians(), Vec3::zeros())
    }

    #[test]
    fn identity_pair_is_exactly_zero() {
        let e = rotation_error_degrees(&RigidTransform::identity(), &RigidTransform::identity());
        assert_eq!(e.angles, [0.0, 0.0, 0.0]);
        assert!(!e.gimbal_lock);
    }

    #[test]
    fn single_axis_rotations() {
        let e = rotation_error_degrees(&rot(Vec3::z(), 30.0), &RigidTransform::identity());
        assert!((e.angles[0] - 30.0).abs() < 1e-12);
        assert!(e.angles[1].abs() < 1e-12 && e.angles[2].abs() < 1e-12);
        let e = rotation_error_degrees(&rot(Vec3::x(), -40.0), &RigidTransform::identity());
        assert!((e.angles[2] - 40.0).abs() < 1e-12);
        let e = rotation_error_degrees(&rot(Vec3::z(), 180.0), &RigidTransform::identity());
        assert!((e.angles[0] - 180.0).abs() < 1e-9);
    }

    #[test]
    fn gimbal_lock_flagged() {
        let e = rotation_error_degrees(&rot(Vec3::y(), 90.0), &RigidTransform::identity());
        assert!(e.gimbal_lock);
        assert!((e.angles[1] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn aggregation() {
        let m = ErrorMetrics::from_errors(&[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]], &[[0.5; 3]]);
        assert!((m.mse_r - 14.0 / 6.0).abs() < 1e-15);
        assert!((m.mae_r - 1.0).abs() < 1e-15);
        assert_eq!(m.mse_t, 0.25);
        assert_eq!(m.trials, 2);
        assert!(ErrorMetrics::from_errors(&[], &[]).mse_r.is_nan());
    }
}
