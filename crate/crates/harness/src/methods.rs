//! Registration methods compared by the harness and their per-pair reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use skelreg::registration::{
    estimate_transform_with, icp_baseline, inlier_ratio, register_srrf, RegistrationReport, SrrfConfig, TrialErrors,
};
use skelreg::skeleton::SkeletonPair;
use skelreg::{PointCloud, RigidTransform};

use crate::config::IcpConfig;
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Nearest-neighbour ICP from the identity.
    Icp,
    /// Soft-correspondence estimate on the corrupted clouds.
    RawSoft,
    /// Soft-correspondence estimate on the skeleton point sets.
    SkeletonOnly,
    /// Inlier-weighted fusion of the two estimates above.
    SrrfFused,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Icp, Method::RawSoft, Method::SkeletonOnly, Method::SrrfFused];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Icp => "icp",
            Method::RawSoft => "raw_soft",
            Method::SkeletonOnly => "skeleton_only",
            Method::SrrfFused => "srrf_fused",
        }
    }

    pub fn needs_skeleton(self) -> bool {
        matches!(self, Method::SkeletonOnly | Method::SrrfFused)
    }

    /// Parses a comma-separated method list.
    pub fn parse_list(list: &str) -> Result<Vec<Method>, HarnessError> {
        let methods = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if methods.is_empty() {
            return Err(HarnessError::Config("empty method list".into()));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

/// Settings shared by all methods.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MethodSettings {
    pub registration: SrrfConfig,
    pub icp: IcpConfig,
}

/// Outcome of one method on one pair. Ratios that a method does not
/// produce are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub error: Option<String>,
    pub transform: Option<RigidTransform>,
    pub errors: Option<TrialErrors>,
    pub lambda: Option<f64>,
    pub gamma_c: Option<f64>,
    pub gamma_s: Option<f64>,
}

impl MethodReport {
    pub fn failed(method: Method, error: impl fmt::Display) -> Self {
        Self {
            method,
            error: Some(error.to_string()),
            transform: None,
            errors: None,
            lambda: None,
            gamma_c: None,
            gamma_s: None,
        }
    }

    fn success(
        method: Method,
        tf: RigidTransform,
        gt: &RigidTransform,
        lambda: Option<f64>,
        gamma_c: Option<f64>,
        gamma_s: Option<f64>,
    ) -> Self {
        Self {
            method,
            error: None,
            transform: Some(tf),
            errors: Some(TrialErrors::new(&tf, gt)),
            lambda,
            gamma_c,
            gamma_s,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Everything one pair produced.
#[derive(Clone, Debug)]
pub struct PairRun {
    pub methods: Vec<MethodReport>,
    pub srrf: Option<RegistrationReport>,
    pub skeletons: Option<SkeletonPair>,
}

/// Runs `methods` on one pair. Failures are captured per method.
pub fn run_methods(
    source: &PointCloud,
    target: &PointCloud,
    gt: &RigidTransform,
    methods: &[Method],
    settings: &MethodSettings,
) -> PairRun {
    let threshold = settings.registration.inlier_threshold;
    let mut srrf = None;
    let mut skeletons = None;
    let mut branch: Option<Result<(RigidTransform, f64), String>> = None;

    if methods.iter().any(|m| m.needs_skeleton()) {
        match register_srrf(source, target, &settings.registration) {
            Ok(out) => {
                branch = Some(Ok((out.report.tf_corrupted, out.report.gamma_c)));
                skeletons = out.skeletons;
                srrf = Some(Ok(out.report));
            }
            Err(e) => srrf = Some(Err(e.to_string())),
        }
    }

    let mut raw = || -> Result<(RigidTransform, f64), String> {
        if let Some(b) = &branch {
            return b.clone();
        }
        let result = estimate_transform_with(source.points(), target.points(), &settings.registration.estimator)
            .and_then(|e| {
                let gamma = inlier_ratio(source.points(), target.points(), &e.transform, threshold)?;
                Ok((e.transform, gamma))
            })
            .map_err(|e| e.to_string());
        branch = Some(result.clone());
        result
    };

    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let report = match method {
            Method::Icp => icp_baseline(
                source.points(),
                target.points(),
                settings.icp.max_iters,
                settings.icp.tol,
            )
            .and_then(|r| {
                let gamma = inlier_ratio(source.points(), target.points(), &r.transform, threshold)?;
                Ok(MethodReport::success(method, r.transform, gt, None, Some(gamma), None))
            })
            .unwrap_or_else(|e| MethodReport::failed(method, e)),
            Method::RawSoft => match raw() {
                Ok((tf, gamma)) => MethodReport::success(method, tf, gt, Some(1.0), Some(gamma), None),
                Err(e) => MethodReport::failed(method, e),
            },
            Method::SkeletonOnly | Method::SrrfFused => match srrf.as_ref().expect("skeleton branch ran") {
                Err(e) => MethodReport::failed(method, e),
                Ok(r) if r.skeleton_failed.is_some() && method == Method::SkeletonOnly => MethodReport::failed(
                    method,
                    format!("skeleton extraction failed: {}", r.skeleton_failed.as_deref().unwrap_or("")),
                ),
                Ok(r) if method == Method::SkeletonOnly => {
                    MethodReport::success(method, r.tf_skeleton, gt, Some(0.0), None, Some(r.gamma_s))
                }
                Ok(r) => MethodReport::success(
                    method,
                    r.tf_fused,
                    gt,
                    Some(r.lambda),
                    Some(r.gamma_c),
                    Some(r.gamma_s),
                ),
            },
        };
        reports.push(report);
    }

    PairRun {
        methods: reports,
        srrf: srrf.and_then(Result::ok).map(|r| r.with_ground_truth(gt)),
        skeletons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert_eq!(
            Method::parse_list("icp, srrf_fused").unwrap(),
            vec![Method::Icp, Method::SrrfFused]
        );
        assert!(Method::parse_list("icp,magic").is_err());
        assert!(Method::parse_list("").is_err());
    }
}
