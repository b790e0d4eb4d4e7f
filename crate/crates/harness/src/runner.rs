//! Execution of methods over a manifest.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skelreg::registration::RegistrationReport;
use skelreg::skeleton::{SkeletonConfig, SkeletonPair};
use skelreg::RigidTransform;

use crate::dataset::Manifest;
use crate::methods::{run_methods, Method, MethodReport, MethodSettings};
use crate::results::ResultsTable;
use crate::{write_file, HarnessError};

/// Report for one manifest entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub index: usize,
    pub shape: String,
    pub trial: usize,
    pub corruption: String,
    pub source_file: String,
    pub target_file: String,
    pub ground_truth: RigidTransform,
    pub methods: Vec<MethodReport>,
    /// Full pipeline report when a skeleton method ran.
    pub srrf: Option<RegistrationReport>,
}

pub struct RunOutput {
    pub reports: Vec<PairReport>,
    pub table: ResultsTable,
    pub skeletons: Vec<Option<SkeletonPair>>,
}

impl RunOutput {
    pub fn failures(&self) -> usize {
        self.table.failures()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Builds a worker pool of `jobs` threads (at least one).
pub fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

/// Runs `methods` on every manifest entry with `jobs` workers. Results are
/// in manifest order regardless of completion order; a pair that cannot be
/// loaded or registered becomes failure reports.
pub fn run_manifest(
    manifest: &Manifest,
    methods: &[Method],
    settings: &MethodSettings,
    jobs: usize,
) -> Result<RunOutput, HarnessError> {
    let work = |index: usize| -> (PairReport, Option<SkeletonPair>) {
        let entry = &manifest.entries[index];
        let ground_truth = entry.ground_truth().unwrap_or_default();
        let (methods_out, srrf, skeletons) = match manifest.load_pair(index) {
            Ok((source, target)) => {
                let run = run_methods(&source, &target, &ground_truth, methods, settings);
                (run.methods, run.srrf, run.skeletons)
            }
            Err(e) => (
                methods.iter().map(|&m| MethodReport::failed(m, &e)).collect(),
                None,
                None,
            ),
        };
        let report = PairReport {
            index,
            shape: entry.shape.clone(),
            trial: entry.trial,
            corruption: entry.cell().label(),
            source_file: entry.source_file.clone(),
            target_file: entry.target_file.clone(),
            ground_truth,
            methods: methods_out,
            srrf,
        };
        (report, skeletons)
    };

    let results: Vec<(PairReport, Option<SkeletonPair>)> =
        pool(jobs)?.install(|| (0..manifest.entries.len()).into_par_iter().map(work).collect());
    let (reports, skeletons): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let table = aggregate_reports(&reports, methods);
    Ok(RunOutput {
        reports,
        table,
        skeletons,
    })
}

/// Recomputes the results table from pair reports.
pub fn aggregate_reports(reports: &[PairReport], methods: &[Method]) -> ResultsTable {
    ResultsTable::aggregate(
        reports
            .iter()
            .flat_map(|p| p.methods.iter().map(move |m| (p.corruption.as_str(), m))),
        methods,
    )
}

/// Writes the results table (`results.csv` or `results.json`) and one JSON
/// report per pair under `reports/`. With `skeleton_config`, extracted
/// skeletons and loss traces are written next to the reports.
pub fn write_run(
    out_dir: &Path,
    run: &RunOutput,
    format: OutputFormat,
    skeleton_config: Option<&SkeletonConfig>,
) -> Result<(), HarnessError> {
    match format {
        OutputFormat::Csv => write_file(&out_dir.join("results.csv"), &run.table.to_csv())?,
        OutputFormat::Json => write_file(&out_dir.join("results.json"), &run.table.to_json())?,
    }
    for (report, skeletons) in run.reports.iter().zip(&run.skeletons) {
        let stem = format!("reports/pair_{:05}", report.index);
        let json = serde_json::to_string_pretty(report)? + "\n";
        write_file(&out_dir.join(format!("{stem}.json")), &json)?;
        if let (Some(cfg), Some(pair)) = (skeleton_config, skeletons) {
            for (side, skeleton) in [("source", &pair.source), ("target", &pair.target)] {
                let record = serde_json::to_string_pretty(&skeleton.record(cfg))? + "\n";
                write_file(&out_dir.join(format!("{stem}_{side}.skeleton.json")), &record)?;
            }
            write_file(&out_dir.join(format!("{stem}_trace.csv")), &pair.trace.to_csv())?;
        }
    }
    Ok(())
}
