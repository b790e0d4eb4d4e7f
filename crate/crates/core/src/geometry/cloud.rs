use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::{Error, Result};

/// Provenance of a point after corruption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Clean,
    Added,
    Perturbed,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Clean => "clean",
            Label::Added => "added",
            Label::Perturbed => "perturbed",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Label::Clean => 0,
            Label::Added => 1,
            Label::Perturbed => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Clean),
            1 => Some(Label::Added),
            2 => Some(Label::Perturbed),
            _ => None,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Label::Clean),
            "added" => Ok(Label::Added),
            "perturbed" => Ok(Label::Perturbed),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

/// An ordered set of 3D points with optional per-point provenance labels.
///
/// Every coordinate is finite; construction rejects NaN and infinities.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    labels: Option<Vec<Label>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { points, labels: None })
    }

    pub fn with_labels(points: Vec<Vec3>, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    /// Label of point `i`; unlabeled clouds report every point as clean.
    pub fn label(&self, i: usize) -> Label {
        self.labels.as_ref().map_or(Label::Clean, |l| l[i])
    }

    /// Labels for every point, materialising `Clean` for unlabeled clouds.
    pub fn labels_or_clean(&self) -> Vec<Label> {
        match &self.labels {
            Some(l) => l.clone(),
            None => vec![Label::Clean; self.points.len()],
        }
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Label>>) {
        (self.points, self.labels)
    }

    pub fn centroid(&self) -> Result<Vec3> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(centroid(&self.points))
    }

    pub fn bounding_box(&self) -> Result<Aabb> {
        Aabb::from_points(&self.points)
    }

    /// Subset in the order given by `indices`, keeping labels.
    pub fn select(&self, indices: &[usize]) -> Self {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self { points, labels }
    }

    /// Applies `f` to every point, keeping labels.
    pub fn map_points(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        let points: Vec<Vec3> = self.points.iter().map(f).collect();
        let mut out = Self::new(points)?;
        out.labels = self.labels.clone();
        Ok(out)
    }
}

pub(crate) fn centroid(points: &[Vec3]) -> Vec3 {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let (min, max) = points.iter().fold((*first, *first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        });
        Ok(Self { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Smallest cube sharing this box's center that encloses it.
    pub fn bounding_cube(&self) -> Aabb {
        let half = self.extent().max() * 0.5;
        let c = self.center();
        let h = Vec3::repeat(half);
        // guard against rounding shrinking the cube below the box
        Aabb {
            min: (c - h).inf(&self.min),
            max: (c + h).sup(&self.max),
        }
    }
}

/// Scale and offset that map a cloud into the origin-centered unit cube.
///
/// `normalized = (original - offset) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub offset: [f64; 3],
}

impl Normalization {
    pub fn forward(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.offset)) / self.scale
    }

    pub fn inverse(&self, p: &Vec3) -> Vec3 {
        p * self.scale + Vec3::from(self.offset)
    }
}

/// Centers a cloud on its centroid and scales it so the largest absolute
/// coordinate is exactly one.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<(PointCloud, Normalization)> {
    let c = cloud.centroid()?;
    let scale = cloud
        .points()
        .iter()
        .map(|p| (p - c).amax())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(Error::ZeroExtent);
    }
    let record = Normalization {
        scale,
        offset: [c.x, c.y, c.z],
    };
    let out = cloud.map_points(|p| record.forward(p))?;
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_corners() -> PointCloud {
        let mut pts = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn cube_is_already_normalized() {
        let cube = cube_corners();
        let (out, rec) = normalize_cloud(&cube).unwrap();
        assert_eq!(out, cube);
        assert_eq!(rec.scale, 1.0);
        assert_eq!(rec.offset, [0.0; 3]);
    }

    #[test]
    fn triangle_is_centered_then_scaled() {
        let cloud = PointCloud::from_arrays(&[[2.0, 0.0, 0.0], [4.0, 0.0, 0.0], [3.0, 1.0, 0.0]])
            .unwrap();
        let (out, rec) = normalize_cloud(&cloud).unwrap();
        // centroid (3, 1/3, 0); centered extents are 1 in x and 2/3 in y
        assert!((rec.offset[0] - 3.0).abs() < 1e-15);
        assert!((rec.offset[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((rec.scale - 1.0).abs() < 1e-15);
        let expected = [[-1.0, -1.0 / 3.0, 0.0], [1.0, -1.0 / 3.0, 0.0], [0.0, 2.0 / 3.0, 0.0]];
        for (p, e) in out.points().iter().zip(expected.iter()) {
            assert!((p - Vec3::from(*e)).norm() < 1e-15);
        }
        let c = out.centroid().unwrap();
        assert!(c.norm() < 1e-15);
        for (p, q) in out.points().iter().zip(cloud.points()) {
            assert!((rec.inverse(p) - q).norm() < 1e-15);
        }
    }

    #[test]
    fn repeated_point_has_zero_extent() {
        let cloud = PointCloud::new(vec![Vec3::new(0.3, -0.2, 5.0); 5]).unwrap();
        assert!(matches!(normalize_cloud(&cloud), Err(Error::ZeroExtent)));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointCloud::new(vec![Vec3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::from_arrays(&[[0.0, f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn label_count_must_match() {
        let err = PointCloud::with_labels(vec![Vec3::zeros(); 3], vec![Label::Clean; 2]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bounding_cube_encloses_box() {
        let bb = Aabb {
            min: Vec3::new(-1.0, -0.5, 0.0),
            max: Vec3::new(1.0, 0.5, 0.2),
        };
        let cube = bb.bounding_cube();
        assert_eq!(cube.extent(), Vec3::repeat(2.0));
        assert!(cube.contains(&bb.min) && cube.contains(&bb.max));
    }
}
