//! Ablations: down-sampling strategy before registration, and the
//! distribution-distance term of the skeleton objective.
//!
//! Both run on pairs generated in memory from the experiment configuration.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use skelreg::corruption::derive_seed;
use skelreg::geometry::{chamfer_distance, fps_sample, rds_sample, ErrorMetrics};
use skelreg::registration::{estimate_transform_with, TrialErrors};
use skelreg::skeleton::{extract_skeleton_pair_aligned, SkeletonConfig};
use skelreg::{PointCloud, RigidTransform, Vec3};

use crate::config::{ExperimentConfig, Sampling};
use crate::dataset::{GeneratedPair, PairGenerator};
use crate::runner::pool;
use crate::{format_number, HarnessError};

const ABLATION_STREAM: u64 = 4;

fn generate_pairs(config: &ExperimentConfig) -> Result<Vec<GeneratedPair>, HarnessError> {
    let generator = PairGenerator::new(config)?;
    generator
        .coordinates()?
        .into_iter()
        .map(|(shape, cell, trial)| generator.pair(shape, cell, trial))
        .collect()
}

fn pair_seed(config: &ExperimentConfig, index: usize) -> u64 {
    derive_seed(derive_seed(config.seed, ABLATION_STREAM), index as u64)
}

/// One row of the sampling ablation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingRow {
    pub sampling: String,
    pub metrics: ErrorMetrics,
    pub trials: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingTable {
    pub rows: Vec<SamplingRow>,
}

pub const SAMPLING_HEADER: &str = "sampling,mse_r,rmse_r,mae_r,mse_t,rmse_t,mae_t,trials,failed";

impl SamplingTable {
    pub fn row(&self, label: &str) -> Option<&SamplingRow> {
        self.rows.iter().find(|r| r.sampling == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SAMPLING_HEADER}\n");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = write!(out, "{}", r.sampling);
            for v in [m.mse_r, m.rmse_r, m.mae_r, m.mse_t, m.rmse_t, m.mae_t] {
                let _ = write!(out, ",{}", format_number(v));
            }
            let _ = writeln!(out, ",{},{}", r.trials, r.failed);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialises") + "\n"
    }
}

fn points_of(cloud: &PointCloud) -> &[Vec3] {
    cloud.points()
}

/// Registers every pair on the full clouds ("Original") and after each
/// configured down-sampling. RDS and FPS keep `sample_count` points per
/// cloud; SPS uses the extracted skeleton points, with the distribution
/// distance measured after the Original estimate.
pub fn ablate_sampling(config: &ExperimentConfig, jobs: usize) -> Result<SamplingTable, HarnessError> {
    let pairs = generate_pairs(config)?;
    let estimator = &config.registration.estimator;
    let k = config.sample_count();
    let labels: Vec<&str> = std::iter::once("Original")
        .chain(config.ablation.sampling.iter().map(|s| s.label()))
        .collect();

    let work = |(index, pair): (usize, &GeneratedPair)| -> Vec<Option<TrialErrors>> {
        let seed = pair_seed(config, index);
        let estimate = |s: &[Vec3], t: &[Vec3]| -> Option<RigidTransform> {
            estimate_transform_with(s, t, estimator).ok().map(|e| e.transform)
        };
        let original = estimate(pair.source.points(), pair.target.points());
        let mut out = vec![original.map(|tf| TrialErrors::new(&tf, &pair.ground_truth))];
        for &sampling in &config.ablation.sampling {
            let tf = match sampling {
                Sampling::Rds => rds_sample(&pair.source, k, derive_seed(seed, 0))
                    .and_then(|s| Ok((s, rds_sample(&pair.target, k, derive_seed(seed, 1))?)))
                    .ok()
                    .and_then(|(s, t)| estimate(points_of(&s), points_of(&t))),
                Sampling::Fps => fps_sample(&pair.source, k, derive_seed(seed, 0))
                    .and_then(|s| Ok((s, fps_sample(&pair.target, k, derive_seed(seed, 1))?)))
                    .ok()
                    .and_then(|(s, t)| estimate(points_of(&s), points_of(&t))),
                Sampling::Sps => {
                    let alignment = original.unwrap_or_default();
                    extract_skeleton_pair_aligned(&pair.source, &pair.target, &alignment, &config.registration.skeleton)
                        .ok()
                        .and_then(|sk| estimate(sk.source.points(), sk.target.points()))
                }
            };
            out.push(tf.map(|tf| TrialErrors::new(&tf, &pair.ground_truth)));
        }
        out
    };

    let per_pair: Vec<Vec<Option<TrialErrors>>> =
        pool(jobs)?.install(|| pairs.par_iter().enumerate().map(work).collect());

    let rows = labels
        .iter()
        .enumerate()
        .map(|(col, label)| {
            let ok: Vec<TrialErrors> = per_pair.iter().filter_map(|p| p[col]).collect();
            let rot: Vec<[f64; 3]> = ok.iter().map(|e| e.rotation.angles).collect();
            let trans: Vec<[f64; 3]> = ok.iter().map(|e| e.translation).collect();
            SamplingRow {
                sampling: label.to_string(),
                metrics: ErrorMetrics::from_errors(&rot, &trans),
                trials: ok.len(),
                failed: per_pair.len() - ok.len(),
            }
        })
        .collect();
    Ok(SamplingTable { rows })
}

/// One row of the distribution-distance ablation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdlRow {
    pub setting: String,
    pub lambda_ddl: f64,
    pub d_cd_mean: f64,
    /// Per-pair skeleton distances in generation order (NaN on failure).
    pub per_pair: Vec<f64>,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdlTable {
    pub rows: Vec<DdlRow>,
}

pub const DDL_HEADER: &str = "setting,lambda_ddl,d_cd_mean,pairs,failed";

impl DdlTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{DDL_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.setting,
                format_number(r.lambda_ddl),
                format_number(r.d_cd_mean),
                r.per_pair.len() - r.failed,
                r.failed
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "setting": r.setting,
                    "lambda_ddl": r.lambda_ddl,
                    "d_cd_mean": r.d_cd_mean.is_finite().then_some(r.d_cd_mean),
                    "pairs": r.per_pair.len() - r.failed,
                    "failed": r.failed,
                })
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("table serialises") + "\n"
    }
}

/// Skeleton distance between the ground-truth-mapped source skeleton and
/// the target skeleton.
fn skeleton_distance(pair: &GeneratedPair, alignment: &RigidTransform, cfg: &SkeletonConfig) -> Option<f64> {
    let skeletons = extract_skeleton_pair_aligned(&pair.source, &pair.target, alignment, cfg).ok()?;
    let mapped: Vec<Vec3> = skeletons
        .source
        .points()
        .iter()
        .map(|p| pair.ground_truth.apply(p))
        .collect();
    chamfer_distance(&mapped, skeletons.target.points()).ok()
}

/// Extracts skeleton pairs without and with the distribution-distance term
/// and reports the mean skeleton chamfer distance after mapping the source
/// skeleton by the ground truth. During extraction the source is aligned by
/// the raw-cloud estimate, as in the registration pipeline.
pub fn ablate_ddl(config: &ExperimentConfig, jobs: usize) -> Result<DdlTable, HarnessError> {
    let configured = config.registration.skeleton.lambda_ddl;
    if configured <= 0.0 {
        return Err(HarnessError::Config(
            "the distribution-distance ablation needs registration.skeleton.lambda_ddl > 0".into(),
        ));
    }
    let pairs = generate_pairs(config)?;
    let settings = [("w/o L_d", 0.0), ("w/ L_d", configured)];
    let estimator = &config.registration.estimator;

    let work = |pair: &GeneratedPair| -> [f64; 2] {
        let alignment = estimate_transform_with(pair.source.points(), pair.target.points(), estimator)
            .map(|e| e.transform)
            .unwrap_or_default();
        settings.map(|(_, lambda)| {
            let cfg = SkeletonConfig {
                lambda_ddl: lambda,
                ..config.registration.skeleton.clone()
            };
            skeleton_distance(pair, &alignment, &cfg).unwrap_or(f64::NAN)
        })
    };
    let per_pair: Vec<[f64; 2]> = pool(jobs)?.install(|| pairs.par_iter().map(work).collect());

    let rows = settings
        .iter()
        .enumerate()
        .map(|(col, (label, lambda))| {
            let values: Vec<f64> = per_pair.iter().map(|v| v[col]).collect();
            let ok: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let mean = if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            };
            DdlRow {
                setting: label.to_string(),
                lambda_ddl: *lambda,
                d_cd_mean: mean,
                failed: values.len() - ok.len(),
                per_pair: values,
            }
        })
        .collect();
    Ok(DdlTable { rows })
}
