use nalgebra::{Matrix3, SymmetricEigen};

use crate::geometry::{SpatialIndex, Vec3};
use crate::{Error, Result};

/// Neighbourhood size for the local covariance descriptor.
pub const NEIGHBOURS: usize = 16;
/// Feature dimension.
pub const FEATURE_DIM: usize = 10;

/// Per-point descriptors, one row per point, each row of unit length.
///
/// Columns: centred coordinates (3), distance to the centroid (1), local
/// covariance eigenvalues over the 16 nearest neighbours in descending order
/// (3), then linearity, planarity and sphericity of those eigenvalues (3).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<[f64; FEATURE_DIM]>,
}

impl FeatureMatrix {
    /// Wraps rows as given, without normalisation.
    pub fn from_rows(rows: Vec<[f64; FEATURE_DIM]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; FEATURE_DIM]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Eigenvalues of the population covariance of `points`, descending.
pub fn covariance_eigenvalues(points: &[Vec3]) -> [f64; 3] {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut c = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        c += d * d.transpose();
    }
    c /= n;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// Unnormalised descriptor rows.
pub fn raw_features(points: &[Vec3]) -> Result<Vec<[f64; FEATURE_DIM]>> {
    if points.len() < NEIGHBOURS {
        return Err(Error::TooFewPoints {
            needed: NEIGHBOURS,
            got: points.len(),
        });
    }
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let index = SpatialIndex::new(points);
    let mut neighbourhood = Vec::with_capacity(NEIGHBOURS);
    Ok(points
        .iter()
        .map(|p| {
            neighbourhood.clear();
            neighbourhood.extend(index.knn(p, NEIGHBOURS).into_iter().map(|(i, _)| points[i]));
            let ev = covariance_eigenvalues(&neighbourhood).map(|e| e.max(0.0));
            let c = p - centroid;
            let (lin, pla, sph) = if ev[0] > 0.0 {
                ((ev[0] - ev[1]) / ev[0], (ev[1] - ev[2]) / ev[0], ev[2] / ev[0])
            } else {
                (0.0, 0.0, 0.0)
            };
            [c.x, c.y, c.z, c.norm(), ev[0], ev[1], ev[2], lin, pla, sph]
        })
        .collect())
}

/// Scales each row to unit length (rows of all zeros are left as they are).
pub(crate) fn normalise_rows(rows: &mut [[f64; FEATURE_DIM]]) {
    for row in rows {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Descriptor rows, L2-normalised.
pub fn embed_features(points: &[Vec3]) -> Result<FeatureMatrix> {
    let mut rows = raw_features(points)?;
    normalise_rows(&mut rows);
    Ok(FeatureMatrix { rows })
}
