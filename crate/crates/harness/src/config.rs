//! Experiment configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//! shapes = ["table", "airplane"]      # built-in names or cloud files
//! points = 1024
//! trials = 10
//! rotation_max_deg = 45.0
//! translation_max = 0.5
//! methods = ["icp", "raw_soft", "skeleton_only", "srrf_fused"]
//! seed = 7
//! output_dir = "out"
//!
//! [[corruptions]]
//! kind = "gaussian"                   # any corruption kind, or "none"
//! severities = [1, 3, 5]
//!
//! [registration.skeleton]
//! steps = 300
//!
//! [icp]
//! max_iters = 50
//!
//! [ablation]
//! sampling = ["rds", "fps", "sps"]
//! ```
//!
//! Relative paths (shape files, `output_dir`) are resolved against the
//! directory holding the configuration file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use skelreg::corruption::CorruptionKind;
use skelreg::registration::SrrfConfig;

use crate::methods::Method;
use crate::shapes::BUILTIN_SHAPES;
use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// One corruption cell of an experiment: either the clean pair or a kind at
/// a severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Corruption {
    None,
    Kind(CorruptionKind, u8),
}

impl Corruption {
    /// Label used in result tables, e.g. `gaussian@3` or `none`.
    pub fn label(&self) -> String {
        match self {
            Corruption::None => "none".to_string(),
            Corruption::Kind(kind, severity) => format!("{kind}@{severity}"),
        }
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSet {
    pub kind: String,
    #[serde(default)]
    pub severities: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
        }
    }
}

/// Down-sampling strategies compared by the sampling ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Rds,
    Fps,
    Sps,
}

impl Sampling {
    pub fn label(self) -> &'static str {
        match self {
            Sampling::Rds => "RDS",
            Sampling::Fps => "FPS",
            Sampling::Sps => "SPS",
        }
    }
}

impl FromStr for Sampling {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rds" => Ok(Sampling::Rds),
            "fps" => Ok(Sampling::Fps),
            "sps" => Ok(Sampling::Sps),
            other => Err(HarnessError::Config(format!("unknown sampling method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub sampling: Vec<Sampling>,
    /// Points kept by RDS and FPS; defaults to the skeleton size so every
    /// strategy registers equally many points.
    pub sample_count: Option<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            sampling: vec![Sampling::Rds, Sampling::Fps, Sampling::Sps],
            sample_count: None,
        }
    }
}

fn default_points() -> usize {
    1024
}

fn default_rotation_max() -> f64 {
    45.0
}

fn default_translation_max() -> f64 {
    0.5
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub shapes: Vec<String>,
    #[serde(default = "default_points")]
    pub points: usize,
    pub corruptions: Vec<CorruptionSet>,
    pub trials: usize,
    #[serde(default = "default_rotation_max")]
    pub rotation_max_deg: f64,
    #[serde(default = "default_translation_max")]
    pub translation_max: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub registration: SrrfConfig,
    #[serde(default)]
    pub icp: IcpConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn resolve(&self, path: impl AsRef<Path>) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version must be {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.trials < 1 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if !(self.rotation_max_deg > 0.0 && self.rotation_max_deg <= 180.0) {
            return Err(HarnessError::Config(format!(
                "rotation_max_deg must lie in (0, 180], got {}",
                self.rotation_max_deg
            )));
        }
        if !(self.translation_max.is_finite() && self.translation_max >= 0.0) {
            return Err(HarnessError::Config(format!(
                "translation_max must be finite and non-negative, got {}",
                self.translation_max
            )));
        }
        if self.points < 3 {
            return Err(HarnessError::Config("points must be at least 3".into()));
        }
        if self.shapes.is_empty() {
            return Err(HarnessError::Config("at least one shape is required".into()));
        }
        for shape in &self.shapes {
            if !BUILTIN_SHAPES.contains(&shape.as_str()) && !self.resolve(shape).is_file() {
                return Err(HarnessError::UnknownShape(shape.clone()));
            }
        }
        if self.corruptions.is_empty() {
            return Err(HarnessError::Config("at least one corruption entry is required".into()));
        }
        self.cells()?;
        if self.methods.is_empty() {
            return Err(HarnessError::Config("at least one method is required".into()));
        }
        if self.ablation.sample_count == Some(0) {
            return Err(HarnessError::Config("ablation.sample_count must be positive".into()));
        }
        self.registration.skeleton.validate()?;
        self.registration.estimator.validate()?;
        Ok(())
    }

    /// Expands the corruption entries into cells, in configuration order.
    pub fn cells(&self) -> Result<Vec<Corruption>, HarnessError> {
        let mut cells = Vec::new();
        for set in &self.corruptions {
            if set.kind == "none" {
                if !set.severities.is_empty() {
                    return Err(HarnessError::Config("corruption `none` takes no severities".into()));
                }
                cells.push(Corruption::None);
                continue;
            }
            let kind: CorruptionKind = set
                .kind
                .parse()
                .map_err(|_| HarnessError::Config(format!("unknown corruption kind `{}`", set.kind)))?;
            if set.severities.is_empty() {
                return Err(HarnessError::Config(format!("corruption `{}` lists no severities", set.kind)));
            }
            for &severity in &set.severities {
                if !(1..=5).contains(&severity) {
                    return Err(HarnessError::Config(format!(
                        "severity of `{}` must be 1..=5, got {severity}",
                        set.kind
                    )));
                }
                cells.push(Corruption::Kind(kind, severity));
            }
        }
        Ok(cells)
    }

    pub fn sample_count(&self) -> usize {
        self.ablation
            .sample_count
            .unwrap_or(self.registration.skeleton.n_skeleton)
    }
}
