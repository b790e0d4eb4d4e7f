//! Benchmark harness for skeleton-assisted registration: synthetic dataset
//! generation, method execution over a manifest, metric aggregation into
//! CSV tables, sampling and distribution-loss ablations, and inspection of
//! clouds and skeletons.

pub mod ablation;
pub mod config;
pub mod dataset;
pub mod inspect;
pub mod methods;
pub mod results;
pub mod runner;
pub mod shapes;

use std::path::{Path, PathBuf};

pub use config::{Corruption, ExperimentConfig, Sampling};
pub use dataset::{generate_dataset, Manifest, ManifestEntry};
pub use methods::Method;
pub use results::{ResultRow, ResultsTable};
pub use runner::{run_manifest, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] skelreg::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown shape `{0}`: neither a built-in shape nor a readable file")]
    UnknownShape(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}

/// Writes `contents` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Formats a value for CSV output: shortest round-trip form, `nan` for
/// not-a-number.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}
