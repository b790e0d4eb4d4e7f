//! Skeletal-sphere extraction.
//!
//! A skeleton of `m` spheres is carried by a weight matrix `W` (`n × m`)
//! over `n` farthest-point samples of the cloud: every column lies on the
//! probability simplex, skeleton points are `S = Wᵀ X*`, and radii are
//! `r = Wᵀ D` with `D` the distance of each sample to its nearest skeleton
//! point.
//!
//! The weights of a source/target pair are found by direct optimisation of
//! column-softmax logits against `L_bsp(X) + L_bsp(Y) + λ_ddl · L_ddl`. The
//! two problems are coupled only through the distribution distance term,
//! which is evaluated after mapping the source skeleton with a fixed rigid
//! alignment (identity by default, the raw-cloud estimate inside the
//! registration pipeline).

pub mod objective;
mod optim;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corruption::derive_seed;
use crate::geometry::{fps_indices, PointCloud, RigidTransform, Vec3};
use crate::{Error, Result};

pub use objective::{
    column_softmax, CloudObjective, ComponentGradients, ComponentValues, LossWeights, PairObjective,
};
pub use optim::Optimizer;

/// Simplex tolerance accepted from callers.
const INPUT_SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonConfig {
    /// Farthest-point samples per cloud.
    pub n_samples: usize,
    /// Skeleton spheres per cloud.
    pub n_skeleton: usize,
    /// Weight of the point-to-sphere loss.
    pub lambda1: f64,
    /// Weight of the radius regulariser.
    pub lambda2: f64,
    /// Weight of the distribution distance between the two skeletons.
    pub lambda_ddl: f64,
    pub steps: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
    /// Temperature of the soft-min used for gradients of nearest distances.
    pub softmin_temperature: f64,
    /// Initial logits put `1 / init_temperature` on one distinct sample per
    /// column.
    pub init_temperature: f64,
    pub seed: u64,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self {
            n_samples: 256,
            n_skeleton: 64,
            lambda1: 0.3,
            lambda2: 0.4,
            lambda_ddl: 1.0,
            steps: 500,
            step_size: 0.05,
            optimizer: Optimizer::Adam,
            softmin_temperature: 0.01,
            init_temperature: 0.1,
            seed: 0,
        }
    }
}

impl SkeletonConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_skeleton == 0 || self.n_skeleton > self.n_samples {
            return bad(format!(
                "n_skeleton must be in 1..=n_samples ({}), got {}",
                self.n_samples, self.n_skeleton
            ));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_ddl", self.lambda_ddl),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("step_size", self.step_size),
            ("softmin_temperature", self.softmin_temperature),
            ("init_temperature", self.init_temperature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda_ddl: self.lambda_ddl,
            temperature: self.softmin_temperature,
        }
    }
}

/// Skeletal spheres of one cloud together with the weights that produce them.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    samples: Vec<Vec3>,
    weights: DMatrix<f64>,
    points: Vec<Vec3>,
    distances: Vec<f64>,
    radii: Vec<f64>,
}

impl Skeleton {
    /// Builds the skeleton for `weights` (`samples.len() × m`), computing
    /// points, exact nearest-skeleton distances and radii.
    pub fn from_weights(samples: Vec<Vec3>, weights: DMatrix<f64>) -> Result<Self> {
        let points = skeleton_points(&weights, &samples)?;
        let distances: Vec<f64> = samples
            .iter()
            .map(|x| nearest_skeleton_distance(x, &points))
            .collect();
        let radii = skeleton_radii(&weights, &distances)?;
        Ok(Self {
            samples,
            weights,
            points,
            distances,
            radii,
        })
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

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn samples(&self) -> &[Vec3] {
        &self.samples
    }

    /// Nearest-skeleton distance of every sample.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn to_cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.points.clone())
    }

    pub fn record(&self, config: &SkeletonConfig) -> SkeletonRecord {
        SkeletonRecord {
            points: self.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            radii: self.radii.clone(),
            n_samples: self.samples.len(),
            config: config.clone(),
        }
    }
}

/// JSON form of a skeleton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonRecord {
    pub points: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
    pub n_samples: usize,
    pub config: SkeletonConfig,
}

fn check_simplex(weights: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (j, col) in weights.column_iter().enumerate() {
        if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < -tol) {
            return Err(Error::ConstraintViolated(format!("column {j} has entry {v}")));
        }
        let sum = col.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::ConstraintViolated(format!("column {j} sums to {sum}")));
        }
    }
    Ok(())
}

/// `Wᵀ X*`: each skeleton point as a convex combination of the samples.
pub fn skeleton_points(weights: &DMatrix<f64>, samples: &[Vec3]) -> Result<Vec<Vec3>> {
    if weights.nrows() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            got: weights.nrows(),
        });
    }
    check_simplex(weights, INPUT_SIMPLEX_TOLERANCE)?;
    Ok(weights
        .column_iter()
        .map(|col| {
            samples
                .iter()
                .zip(col.iter())
                .fold(Vec3::zeros(), |acc, (x, w)| acc + x * *w)
        })
        .collect())
}

/// Distance from `x` to the closest skeleton point (infinite if there is none).
pub fn nearest_skeleton_distance(x: &Vec3, points: &[Vec3]) -> f64 {
    points
        .iter()
        .map(|s| (x - s).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// `Wᵀ D`.
pub fn skeleton_radii(weights: &DMatrix<f64>, distances: &[f64]) -> Result<Vec<f64>> {
    if weights.nrows() != distances.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.nrows(),
            got: distances.len(),
        });
    }
    Ok(weights
        .column_iter()
        .map(|col| col.iter().zip(distances).map(|(w, d)| w * d).sum())
        .collect())
}

/// `L_bsp` components of a finished skeleton against its samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BspLoss {
    pub total: f64,
    pub l_s: f64,
    pub l_p: f64,
    pub l_r: f64,
}

/// `L_s + λ₁ L_p + λ₂ L_r` evaluated on the skeleton's points and radii.
pub fn loss_bsp(samples: &[Vec3], skeleton: &Skeleton, lambda1: f64, lambda2: f64) -> BspLoss {
    let l_s = objective::sampling_loss(samples, skeleton.points(), skeleton.radii()).value;
    let l_p = objective::point_sphere_loss(samples, skeleton.points(), skeleton.radii()).value;
    let l_r = objective::radius_loss(skeleton.radii()).value;
    BspLoss {
        total: l_s + lambda1 * l_p + lambda2 * l_r,
        l_s,
        l_p,
        l_r,
    }
}

/// `‖Rᵀ R_gt - I‖²_F + ‖t - t_gt‖²`.
pub fn loss_registration(estimated: &RigidTransform, ground_truth: &RigidTransform) -> f64 {
    let rel = estimated.rotation().transpose() * ground_truth.rotation();
    (rel - nalgebra::Matrix3::identity()).norm_squared()
        + (estimated.translation() - ground_truth.translation()).norm_squared()
}

/// One optimiser step of the loss trace. Components are summed over both
/// clouds; `total` is the weighted objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub l_s: f64,
    pub l_p: f64,
    pub l_r: f64,
    pub l_ddl: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Row 0 is the initial state; row `k` follows optimiser step `k`.
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn initial(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,l_s,l_p,l_r,l_ddl,total\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.step, r.l_s, r.l_p, r.l_r, r.l_ddl, r.total);
        }
        out
    }
}

/// Skeletons of a source/target pair and the optimisation trace.
#[derive(Clone, Debug)]
pub struct SkeletonPair {
    pub source: Skeleton,
    pub target: Skeleton,
    pub trace: LossTrace,
}

fn initial_logits(n: usize, m: usize, init_temperature: f64) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(n, m);
    for j in 0..m {
        z[(j, j)] = 1.0 / init_temperature;
    }
    z
}

fn fps_samples(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if cloud.len() < n {
        return Err(Error::TooFewPoints {
            needed: n,
            got: cloud.len(),
        });
    }
    Ok(fps_indices(cloud.points(), n, seed)?
        .into_iter()
        .map(|i| cloud.points()[i])
        .collect())
}

/// Extracts both skeletons with the distribution distance evaluated in the
/// clouds' own frames.
pub fn extract_skeleton_pair(source: &PointCloud, target: &PointCloud, config: &SkeletonConfig) -> Result<SkeletonPair> {
    extract_skeleton_pair_aligned(source, target, &RigidTransform::identity(), config)
}

/// Extracts both skeletons; `alignment` maps source coordinates into the
/// target frame before the distribution distance is measured and is treated
/// as a constant.
pub fn extract_skeleton_pair_aligned(
    source: &PointCloud,
    target: &PointCloud,
    alignment: &RigidTransform,
    config: &SkeletonConfig,
) -> Result<SkeletonPair> {
    config.validate()?;
    // Both clouds share one sampling stream so that identical inputs yield
    // identical samples and therefore identical skeletons.
    let sample_seed = derive_seed(config.seed, 0);
    let xs = fps_samples(source, config.n_samples, sample_seed)?;
    let ys = fps_samples(target, config.n_samples, sample_seed)?;
    let z0 = initial_logits(config.n_samples, config.n_skeleton, config.init_temperature);
    let weights = config.loss_weights();
    let settings = optim::Settings {
        steps: config.steps,
        step_size: config.step_size,
        optimizer: config.optimizer,
    };

    let pair = PairObjective {
        source: &xs,
        target: &ys,
        alignment,
        weights,
    };
    let row = |step: usize, v: &ComponentValues, l_ddl: f64| TraceRow {
        step,
        l_s: v.l_s,
        l_p: v.l_p,
        l_r: v.l_r,
        l_ddl,
        total: v.total,
    };

    let (zx, zy, rows) = if config.lambda_ddl == 0.0 {
        // independent problems: each cloud gets its own step acceptance so
        // neither can influence the other
        let run = |samples: &[Vec3]| {
            let obj = CloudObjective { samples, weights };
            let mut points = Vec::with_capacity(config.steps + 1);
            let (mut z, trace) = optim::minimize(
                vec![z0.clone()],
                &settings,
                |z| obj.value(&z[0]),
                |z| {
                    let (v, g) = obj.value_and_gradient(&z[0]);
                    (v, vec![g])
                },
                |z| points.push(objective::forward_points(samples, &z[0])),
            )?;
            Ok::<_, Error>((z.remove(0), trace, points))
        };
        let (zx, tx, px) = run(&xs)?;
        let (zy, ty, py) = run(&ys)?;
        let rows = (0..tx.len())
            .map(|k| {
                let mut v = tx[k];
                v.l_s += ty[k].l_s;
                v.l_p += ty[k].l_p;
                v.l_r += ty[k].l_r;
                v.total += ty[k].total;
                row(k, &v, objective::ddl_loss(&px[k], &py[k], alignment).0)
            })
            .collect();
        (zx, zy, rows)
    } else {
        let (mut z, trace) = optim::minimize(
            vec![z0.clone(), z0],
            &settings,
            |z| pair.value(&z[0], &z[1]),
            |z| {
                let (v, g) = pair.value_and_gradient(&z[0], &z[1]);
                (v, g.to_vec())
            },
            |_| {},
        )?;
        let rows = trace.iter().enumerate().map(|(k, v)| row(k, v, v.l_ddl)).collect();
        let zy = z.remove(1);
        (z.remove(0), zy, rows)
    };

    let wx = column_softmax(&zx);
    let wy = column_softmax(&zy);
    check_simplex(&wx, 1e-9)?;
    check_simplex(&wy, 1e-9)?;
    Ok(SkeletonPair {
        source: Skeleton::from_weights(xs, wx)?,
        target: Skeleton::from_weights(ys, wy)?,
        trace: LossTrace { rows },
    })
}

#[cfg(test)]
mod tests;
