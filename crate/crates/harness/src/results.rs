//! Aggregation of per-pair reports into result tables.

use std::fmt::Write as _;

use serde::Serialize;
use skelreg::geometry::ErrorMetrics;

use crate::format_number;
use crate::methods::{Method, MethodReport};

pub const RESULTS_HEADER: &str =
    "corruption,method,mse_r,rmse_r,mae_r,mse_t,rmse_t,mae_t,lambda_mean,gamma_c_mean,gamma_s_mean,trials";

/// One (corruption, method) cell. Failure rows carry the method name with
/// a `:failed` suffix, their trial count, and NaN metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub corruption: String,
    pub method: String,
    pub metrics: ErrorMetrics,
    pub lambda_mean: f64,
    pub gamma_c_mean: f64,
    pub gamma_s_mean: f64,
    pub trials: usize,
}

impl ResultRow {
    fn values(&self) -> [f64; 9] {
        let m = &self.metrics;
        [
            m.mse_r,
            m.rmse_r,
            m.mae_r,
            m.mse_t,
            m.rmse_t,
            m.mae_t,
            self.lambda_mean,
            self.gamma_c_mean,
            self.gamma_s_mean,
        ]
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    corruption: &'a str,
    method: &'a str,
    mse_r: Option<f64>,
    rmse_r: Option<f64>,
    mae_r: Option<f64>,
    mse_t: Option<f64>,
    rmse_t: Option<f64>,
    mae_t: Option<f64>,
    lambda_mean: Option<f64>,
    gamma_c_mean: Option<f64>,
    gamma_s_mean: Option<f64>,
    trials: usize,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Mean of optional values; NaN if any is missing or there are none.
fn mean_of(values: &[Option<f64>]) -> f64 {
    if values.is_empty() || values.iter().any(Option::is_none) {
        return f64::NAN;
    }
    values.iter().flatten().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Aggregates `(corruption label, report)` pairs. Corruptions appear in
    /// first-seen order, methods in the order of `methods`; each method's
    /// failure row (if any) follows its success row.
    pub fn aggregate<'a>(items: impl IntoIterator<Item = (&'a str, &'a MethodReport)>, methods: &[Method]) -> Self {
        let mut order: Vec<&str> = Vec::new();
        let mut grouped: Vec<Vec<&MethodReport>> = Vec::new();
        for (corruption, report) in items {
            let slot = match order.iter().position(|c| *c == corruption) {
                Some(i) => i,
                None => {
                    order.push(corruption);
                    grouped.push(Vec::new());
                    order.len() - 1
                }
            };
            grouped[slot].push(report);
        }

        let mut rows = Vec::new();
        for (corruption, reports) in order.iter().zip(&grouped) {
            for &method in methods {
                let mine: Vec<&MethodReport> = reports.iter().copied().filter(|r| r.method == method).collect();
                let ok: Vec<&MethodReport> = mine.iter().copied().filter(|r| r.is_ok()).collect();
                let failed = mine.len() - ok.len();
                let rot: Vec<[f64; 3]> = ok.iter().filter_map(|r| r.errors).map(|e| e.rotation.angles).collect();
                let trans: Vec<[f64; 3]> = ok.iter().filter_map(|r| r.errors).map(|e| e.translation).collect();
                let column = |f: fn(&MethodReport) -> Option<f64>| -> f64 {
                    mean_of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>())
                };
                rows.push(ResultRow {
                    corruption: corruption.to_string(),
                    method: method.as_str().to_string(),
                    metrics: ErrorMetrics::from_errors(&rot, &trans),
                    lambda_mean: column(|r| r.lambda),
                    gamma_c_mean: column(|r| r.gamma_c),
                    gamma_s_mean: column(|r| r.gamma_s),
                    trials: ok.len(),
                });
                if failed > 0 {
                    rows.push(ResultRow {
                        corruption: corruption.to_string(),
                        method: format!("{method}:failed"),
                        metrics: ErrorMetrics::from_errors(&[], &[]),
                        lambda_mean: f64::NAN,
                        gamma_c_mean: f64::NAN,
                        gamma_s_mean: f64::NAN,
                        trials: failed,
                    });
                }
            }
        }
        Self { rows }
    }

    pub fn find(&self, corruption: &str, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.corruption == corruption && r.method == method)
    }

    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.method.ends_with(":failed"))
            .map(|r| r.trials)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.corruption, row.method);
            for v in row.values() {
                let _ = write!(out, ",{}", format_number(v));
            }
            let _ = writeln!(out, ",{}", row.trials);
        }
        out
    }

    /// JSON array of rows; NaN cells become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<JsonRow> = self
            .rows
            .iter()
            .map(|r| {
                let v = r.values();
                JsonRow {
                    corruption: &r.corruption,
                    method: &r.method,
                    mse_r: finite(v[0]),
                    rmse_r: finite(v[1]),
                    mae_r: finite(v[2]),
                    mse_t: finite(v[3]),
                    rmse_t: finite(v[4]),
                    mae_t: finite(v[5]),
                    lambda_mean: finite(v[6]),
                    gamma_c_mean: finite(v[7]),
                    gamma_s_mean: finite(v[8]),
                    trials: r.trials,
                }
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("rows serialise") + "\n"
    }
}
