//! Soft-correspondence registration, inlier-weighted fusion of the raw-cloud
//! and skeleton estimates, and an ICP baseline.

mod features;
mod fusion;
mod icp;
mod matching;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    rotation_error_degrees, translation_error, ErrorMetrics, PointCloud, RigidTransform, RotationError,
};
use crate::skeleton::{extract_skeleton_pair_aligned, loss_registration, SkeletonConfig, SkeletonPair};
use crate::{Error, Result};

pub use features::{covariance_eigenvalues, embed_features, raw_features, FeatureMatrix, FEATURE_DIM, NEIGHBOURS};
pub use fusion::{fuse_transforms, Fusion, FusionMode};
pub use icp::{icp_baseline, IcpResult};
pub use matching::{
    estimate_transform, estimate_transform_with, inlier_ratio, soft_correspondence, soft_match, Estimate,
    EstimatorConfig, SoftMatch,
};

/// Settings of the full skeleton-assisted pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrrfConfig {
    pub skeleton: SkeletonConfig,
    pub estimator: EstimatorConfig,
    /// Distance below which a transformed point counts as an inlier.
    pub inlier_threshold: f64,
    pub fusion: FusionMode,
}

impl Default for SrrfConfig {
    fn default() -> Self {
        Self {
            skeleton: SkeletonConfig::default(),
            estimator: EstimatorConfig::default(),
            inlier_threshold: 0.05,
            fusion: FusionMode::Quaternion,
        }
    }
}

/// Errors of an estimate against a ground-truth transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialErrors {
    pub rotation: RotationError,
    pub translation: [f64; 3],
    pub metrics: ErrorMetrics,
    pub l_reg: f64,
}

impl TrialErrors {
    pub fn new(estimated: &RigidTransform, ground_truth: &RigidTransform) -> Self {
        let rotation = rotation_error_degrees(estimated, ground_truth);
        let translation = translation_error(estimated, ground_truth);
        Self {
            rotation,
            translation,
            metrics: ErrorMetrics::from_errors(&[rotation.angles], &[translation]),
            l_reg: loss_registration(estimated, ground_truth),
        }
    }
}

/// Everything produced by one run of [`register_srrf`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub tf_corrupted: RigidTransform,
    pub tf_skeleton: RigidTransform,
    pub tf_fused: RigidTransform,
    pub gamma_c: f64,
    pub gamma_s: f64,
    pub lambda: f64,
    /// Both inlier ratios were zero; the skeleton estimate was used.
    pub no_inliers: bool,
    /// The skeleton branch failed; `tf_skeleton` repeats the raw-cloud
    /// estimate, `gamma_s` is zero and `lambda` is one.
    pub skeleton_failed: Option<String>,
    /// Errors of the fused estimate, when a ground truth was supplied.
    pub errors: Option<TrialErrors>,
}

impl RegistrationReport {
    pub fn with_ground_truth(mut self, ground_truth: &RigidTransform) -> Self {
        self.errors = Some(TrialErrors::new(&self.tf_fused, ground_truth));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Report plus the skeletons it was computed from (absent if that branch failed).
#[derive(Clone, Debug)]
pub struct SrrfOutput {
    pub report: RegistrationReport,
    pub skeletons: Option<SkeletonPair>,
}

/// Skeleton-assisted registration.
///
/// 1. Estimate `T_c` on the corrupted clouds.
/// 2. Extract both skeletons, measuring their distribution distance after
///    mapping the source skeleton with `T_c` (held constant).
/// 3. Estimate `T_s` on the skeleton point sets.
/// 4. Inlier ratios `γ_c` on the clouds under `T_c` and `γ_s` on the
///    skeletons under `T_s`, then fuse with `λ = γ_c / (γ_c + γ_s)`.
///
/// Skeleton extraction finishes before either skeleton estimate is formed,
/// so nothing downstream feeds back into the skeleton weights. A failure in
/// the skeleton branch degrades to the raw-cloud estimate and is reported.
pub fn register_srrf(source: &PointCloud, target: &PointCloud, config: &SrrfConfig) -> Result<SrrfOutput> {
    if !(config.inlier_threshold.is_finite() && config.inlier_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "inlier threshold must be > 0, got {}",
            config.inlier_threshold
        )));
    }
    config.skeleton.validate()?;
    let tf_c = estimate_transform_with(source.points(), target.points(), &config.estimator)?.transform;
    let gamma_c = inlier_ratio(source.points(), target.points(), &tf_c, config.inlier_threshold)?;

    let skeleton_branch = || -> Result<(SkeletonPair, RigidTransform, f64)> {
        let pair = extract_skeleton_pair_aligned(source, target, &tf_c, &config.skeleton)?;
        let tf_s = estimate_transform_with(pair.source.points(), pair.target.points(), &config.estimator)?.transform;
        let gamma_s = inlier_ratio(pair.source.points(), pair.target.points(), &tf_s, config.inlier_threshold)?;
        Ok((pair, tf_s, gamma_s))
    };

    match skeleton_branch() {
        Ok((pair, tf_s, gamma_s)) => {
            let fusion = fuse_transforms(&tf_c, &tf_s, gamma_c, gamma_s, config.fusion)?;
            Ok(SrrfOutput {
                report: RegistrationReport {
                    tf_corrupted: tf_c,
                    tf_skeleton: tf_s,
                    tf_fused: fusion.transform,
                    gamma_c,
                    gamma_s,
                    lambda: fusion.lambda,
                    no_inliers: fusion.no_inliers,
                    skeleton_failed: None,
                    errors: None,
                },
                skeletons: Some(pair),
            })
        }
        Err(e @ (Error::Diverged { .. } | Error::RankDeficientCovariance | Error::NonFinite(_))) => Ok(SrrfOutput {
            report: RegistrationReport {
                tf_corrupted: tf_c,
                tf_skeleton: tf_c,
                tf_fused: tf_c,
                gamma_c,
                gamma_s: 0.0,
                lambda: 1.0,
                no_inliers: false,
                skeleton_failed: Some(e.to_string()),
                errors: None,
            },
            skeletons: None,
        }),
        Err(e) => Err(e),
    }
}
