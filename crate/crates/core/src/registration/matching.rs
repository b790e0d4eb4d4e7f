use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::features::{normalise_rows, raw_features, FeatureMatrix, FEATURE_DIM};
use crate::geometry::{procrustes_solve, RigidTransform, SpatialIndex, Vec3};
use crate::{Error, Result};

/// Row-stochastic soft assignment of source points to target points.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftMatch {
    probabilities: DMatrix<f64>,
    temperature: f64,
}

impl SoftMatch {
    /// `|X| × |Y|` matrix; row `i` is the distribution of source point `i`
    /// over the target points.
    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// Logits more than this far below the row maximum get probability zero;
/// their true weight is below `e^-40` relative to the largest entry.
const SOFTMAX_CUTOFF: f64 = 40.0;

/// In-place softmax of a row of logits.
fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        let x = *v - max;
        *v = if x > -SOFTMAX_CUTOFF { x.exp() } else { 0.0 };
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Per-point weights proportional to the inverse local surface density,
/// `d_k²` for the distance `d_k` to the `k`-th neighbour, scaled to mean one.
/// All ones when `k` is zero or the cloud has at most `k` points.
fn inverse_density(points: &[Vec3], k: usize) -> Vec<f64> {
    if k == 0 || points.len() <= k {
        return vec![1.0; points.len()];
    }
    let index = SpatialIndex::new(points);
    let raw: Vec<f64> = points
        .iter()
        .map(|p| index.knn(p, k + 1).last().map_or(0.0, |&(_, d2)| d2))
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if mean > 0.0 {
        // coincident points would otherwise get weight zero and could empty
        // a softmax window
        raw.iter().map(|w| w.max(mean * 1e-6) / mean).collect()
    } else {
        vec![1.0; points.len()]
    }
}

/// Rounds stop early once the transform moves by less than this (largest
/// change of a rotation or translation entry) at the floor temperature.
const CONVERGENCE_TOL: f64 = 1e-12;

fn transform_change(a: &RigidTransform, b: &RigidTransform) -> f64 {
    (a.rotation() - b.rotation())
        .amax()
        .max((a.translation() - b.translation()).amax())
}

/// `Σ_k softmax(s / τ)_k · points_k` in one pass over the non-negligible
/// entries, without materialising the probabilities.
fn soft_average(similarities: &[f64], tau: f64, points: &[Vec3], weights: &[f64]) -> Vec3 {
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let window = SOFTMAX_CUTOFF * tau;
    let inv_tau = 1.0 / tau;
    let mut sum = 0.0;
    let mut acc = Vec3::zeros();
    for ((v, p), w) in similarities.iter().zip(points).zip(weights) {
        let x = v - max;
        if x > -window {
            let e = (x * inv_tau).exp() * w;
            sum += e;
            acc += p * e;
        }
    }
    acc / sum
}

/// Row `i` is `softmax(Φ_Y φ_{x_i} / τ)`.
pub fn soft_match(phi_x: &FeatureMatrix, phi_y: &FeatureMatrix, tau: f64) -> Result<SoftMatch> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {tau}")));
    }
    if phi_y.is_empty() || phi_x.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (n, m) = (phi_x.len(), phi_y.len());
    let mut data = vec![0.0; n * m];
    for (i, fx) in phi_x.rows().iter().enumerate() {
        let row = &mut data[i * m..(i + 1) * m];
        for (k, fy) in phi_y.rows().iter().enumerate() {
            row[k] = fx.iter().zip(fy).map(|(a, b)| a * b).sum::<f64>() / tau;
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature similarity"));
        }
        softmax_row(row);
    }
    Ok(SoftMatch {
        probabilities: DMatrix::from_row_slice(n, m, &data),
        temperature: tau,
    })
}

/// Probability-weighted average of target points for every source point.
pub fn soft_correspondence(matching: &SoftMatch, target: &[Vec3]) -> Result<Vec<Vec3>> {
    let p = &matching.probabilities;
    if p.ncols() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: p.ncols(),
            got: target.len(),
        });
    }
    Ok((0..p.nrows())
        .map(|i| {
            target
                .iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (k, y)| acc + y * p[(i, k)])
        })
        .collect())
}

/// Settings of the soft-matching transform estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Initial softmax temperature on unit-length features.
    pub tau: f64,
    /// Match/solve rounds. With one round the estimator is a single pass of
    /// embed, match, average and Procrustes.
    pub iterations: usize,
    /// Factor applied to the temperature after each round.
    pub anneal: f64,
    /// Lower bound on the temperature as a fraction of `tau`.
    pub min_tau_fraction: f64,
    /// Weight of the linearity/planarity/sphericity block before row
    /// normalisation.
    pub shape_weight: f64,
    /// Replace each source point by its soft match against the source itself
    /// (same temperature) before solving, so both sides of the Procrustes
    /// problem carry the same smoothing.
    pub symmetric: bool,
    /// When positive, every point's weight in a soft average is divided by
    /// its local surface density, estimated from the distance to its
    /// `density_neighbours`-th nearest neighbour. Zero disables weighting.
    pub density_neighbours: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tau: 0.02,
            iterations: 35,
            anneal: 0.8,
            min_tau_fraction: 0.1,
            shape_weight: 0.25,
            symmetric: true,
            density_neighbours: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau.is_finite()
            && self.tau > 0.0
            && self.iterations >= 1
            && self.anneal > 0.0
            && self.anneal <= 1.0
            && self.min_tau_fraction > 0.0
            && self.min_tau_fraction <= 1.0
            && self.shape_weight.is_finite()
            && self.shape_weight >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid estimator config {self:?}")))
        }
    }
}

/// Output of [`estimate_transform`].
#[derive(Clone, Debug)]
pub struct Estimate {
    pub transform: RigidTransform,
    /// Soft assignment of the final round.
    pub soft_match: SoftMatch,
}

fn weighted_features(points: &[Vec3], shape_weight: f64) -> Result<Vec<[f64; FEATURE_DIM]>> {
    let mut rows = raw_features(points)?;
    for row in &mut rows {
        for v in &mut row[7..] {
            *v *= shape_weight;
        }
    }
    Ok(rows)
}

fn row_norm(row: &[f64; FEATURE_DIM]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn inverse_or_zero(norm: f64) -> f64 {
    if norm > 0.0 {
        1.0 / norm
    } else {
        0.0
    }
}

/// Estimates the rigid transform taking `source` onto `target` with the
/// default estimator settings and initial temperature `tau`.
pub fn estimate_transform(source: &[Vec3], target: &[Vec3], tau: f64) -> Result<Estimate> {
    estimate_transform_with(
        source,
        target,
        &EstimatorConfig {
            tau,
            ..EstimatorConfig::default()
        },
    )
}

/// Soft-matching transform estimation.
///
/// Every round soft-matches the source descriptors against the target
/// descriptors, replaces each source point by its expected target point and
/// solves Procrustes. The positional block of the source descriptors (the
/// coordinates and their distance to the centre) is recomputed from the
/// source points mapped by the current estimate and expressed relative to
/// the target centroid, so later rounds compare the clouds in a common
/// frame; the first round starts from the centroid-aligning translation.
/// The local-shape entries do not depend on the pose. Rows are normalised
/// to unit length after the positional block is placed. The temperature is
/// annealed geometrically from `tau` down to `tau · min_tau_fraction`.
///
/// A soft average of target points is pulled towards the local centre of
/// the target, which biases the solve. With `symmetric` set, the source
/// points are smoothed by the same soft average taken over the source, so a
/// noiseless rigid copy has the true transform as an exact fixed point.
pub fn estimate_transform_with(source: &[Vec3], target: &[Vec3], config: &EstimatorConfig) -> Result<Estimate> {
    config.validate()?;
    let fx = weighted_features(source, config.shape_weight)?;
    let fy = weighted_features(target, config.shape_weight)?;
    let (n, m) = (fx.len(), fy.len());
    // pose-independent part of the similarity, fixed across rounds
    let mut local = vec![0.0; n * m];
    for (i, a) in fx.iter().enumerate() {
        for (k, b) in fy.iter().enumerate() {
            local[i * m + k] = a[4..].iter().zip(&b[4..]).map(|(x, y)| x * y).sum();
        }
    }
    let source_local: Vec<f64> = fx.iter().map(|r| r[4..].iter().map(|v| v * v).sum()).collect();
    let target_inverse: Vec<f64> = fy.iter().map(|r| inverse_or_zero(row_norm(r))).collect();
    let target_coords: Vec<(Vec3, f64)> = fy.iter().map(|r| (Vec3::new(r[0], r[1], r[2]), r[3])).collect();
    let source_centroid = source.iter().sum::<Vec3>() / n as f64;
    let target_centroid = target.iter().sum::<Vec3>() / m as f64;

    let mut self_similarity = Vec::new();
    if config.symmetric {
        let mut unit = fx.clone();
        normalise_rows(&mut unit);
        self_similarity = vec![0.0; n * n];
        for (i, a) in unit.iter().enumerate() {
            for (k, b) in unit.iter().enumerate() {
                self_similarity[i * n + k] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
    }
    let mut smoothed: Vec<Vec3> = source.to_vec();
    let mut smoothed_tau = f64::NAN;

    let similarities = |transform: &RigidTransform, i: usize, row: &mut [f64]| {
        let p = transform.apply(&source[i]) - target_centroid;
        let radius = p.norm();
        let scale = inverse_or_zero((2.0 * radius * radius + source_local[i]).sqrt());
        for (k, v) in row.iter_mut().enumerate() {
            let (q, r) = &target_coords[k];
            *v = (p.dot(q) + radius * r + local[i * m + k]) * scale * target_inverse[k];
        }
    };

    let source_weights = inverse_density(source, config.density_neighbours);
    let target_weights = inverse_density(target, config.density_neighbours);

    let mut transform = RigidTransform::from_translation(target_centroid - source_centroid);
    let mut tau = config.tau;
    let floor = config.tau * config.min_tau_fraction;
    let mut row = vec![0.0; m];
    let mut matched = vec![Vec3::zeros(); n];
    let mut used = (transform, tau);
    for _ in 0..config.iterations {
        for (i, out) in matched.iter_mut().enumerate() {
            similarities(&transform, i, &mut row);
            *out = soft_average(&row, tau, target, &target_weights);
        }
        if config.symmetric && tau != smoothed_tau {
            for (i, out) in smoothed.iter_mut().enumerate() {
                *out = soft_average(&self_similarity[i * n..(i + 1) * n], tau, source, &source_weights);
            }
            smoothed_tau = tau;
        }
        used = (transform, tau);
        transform = procrustes_solve(&smoothed, &matched)?;
        tau = (tau * config.anneal).max(floor);
        // At the floor temperature a round depends only on the transform, so
        // a transform that no longer moves is a fixed point.
        if tau == used.1 && transform_change(&transform, &used.0) <= CONVERGENCE_TOL {
            break;
        }
    }

    // the match of the final round
    let mut probs = vec![0.0; n * m];
    for (i, row) in probs.chunks_mut(m).enumerate() {
        similarities(&used.0, i, row);
        row.iter_mut().for_each(|v| *v /= used.1);
        softmax_row(row);
    }
    if probs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft match"));
    }
    Ok(Estimate {
        transform,
        soft_match: SoftMatch {
            probabilities: DMatrix::from_row_slice(n, m, &probs),
            temperature: used.1,
        },
    })
}

/// Fraction of source points that, after `tf`, have a target point within
/// `threshold`.
pub fn inlier_ratio(source: &[Vec3], target: &[Vec3], tf: &RigidTransform, threshold: f64) -> Result<f64> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be > 0, got {threshold}")));
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let index = SpatialIndex::new(target);
    let t2 = threshold * threshold;
    let inliers = source
        .iter()
        .filter(|p| index.nearest(&tf.apply(p)).is_some_and(|(_, d2)| d2 <= t2))
        .count();
    Ok(inliers as f64 / source.len() as f64)
}
