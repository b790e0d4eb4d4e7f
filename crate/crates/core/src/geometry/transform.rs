use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Mat3, PointCloud, Vec3};
use crate::{Error, Result};

/// Tolerance on orthogonality and determinant of a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A rotation in SO(3) followed by a translation: `p -> R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    /// Validates that `rotation` is special orthogonal within
    /// [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let dev = orthogonality_deviation(&rotation);
        if dev > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!(
                "R^T R deviates from identity by {dev:e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = if axis.norm() == 0.0 {
            Mat3::identity()
        } else {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `(R^T, -R^T t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Largest absolute entry of `R^T R - I`.
    pub fn orthogonality_deviation(&self) -> f64 {
        orthogonality_deviation(&self.rotation)
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn from_row_major(rotation: &[f64; 9], translation: &[f64; 3]) -> Result<Self> {
        Self::new(
            Mat3::from_row_slice(rotation),
            Vec3::new(translation[0], translation[1], translation[2]),
        )
    }

    /// Crate-internal constructor for matrices already known to be in SO(3).
    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn orthogonality_deviation(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).amax()
}

/// Maps every point to `R p + t`, keeping labels.
pub fn apply_transform(cloud: &PointCloud, tf: &RigidTransform) -> PointCloud {
    cloud
        .map_points(|p| tf.apply(p))
        .expect("rigid image of a finite cloud is finite")
}

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

const SERIALIZED_DIGITS: usize = 12;

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rotation = self
            .rotation_row_major()
            .map(|v| round_significant(v, SERIALIZED_DIGITS));
        let translation = [self.translation.x, self.translation.y, self.translation.z]
            .map(|v| round_significant(v, SERIALIZED_DIGITS));
        TransformRepr {
            rotation,
            translation,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TransformRepr::deserialize(deserializer)?;
        RigidTransform::from_row_major(&repr.rotation, &repr.translation)
            .map_err(serde::de::Error::custom)
    }
}
