use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// One value of one metric for one task at one context size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Empty for metrics computed across tasks (calibration).
    pub task_id: Option<usize>,
    pub n: usize,
    pub epsilon: f64,
    pub metric: String,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    /// Set when the task failed; `value` is then empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub task_id: Option<usize>,
    pub n: usize,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub task_id: usize,
    pub n: usize,
    pub phr_estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub phr_analytic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub q: f64,
    pub coverage: f64,
    pub abs_gap: f64,
}

/// Mean absolute error and least-squares slope of estimates on oracle values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleFit {
    pub tasks: usize,
    pub mae: f64,
    /// `None` when the oracle values have no spread.
    pub slope: Option<f64>,
}

impl OracleFit {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Option<Self> {
        if pairs.is_empty() {
            return None;
        }
        let k = pairs.len() as f64;
        let mae = pairs.iter().map(|(e, a)| (e - a).abs()).sum::<f64>() / k;
        let mean_a = pairs.iter().map(|p| p.1).sum::<f64>() / k;
        let mean_e = pairs.iter().map(|p| p.0).sum::<f64>() / k;
        let sxx: f64 = pairs.iter().map(|(_, a)| (a - mean_a).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|(e, a)| (a - mean_a) * (e - mean_e)).sum();
        Some(Self {
            tasks: pairs.len(),
            mae,
            slope: (sxx > 0.0).then(|| sxy / sxx),
        })
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_HEADER: &[&str] = &["task_id", "n", "epsilon", "metric", "value", "std_error", "error"];
pub const TIMING_HEADER: &[&str] = &["task_id", "n", "wall_ms"];
pub const ORACLE_HEADER: &[&str] = &["task_id", "n", "phr_estimate", "std_error", "phr_analytic", "error"];
pub const CALIBRATION_HEADER: &[&str] = &["q", "coverage", "abs_gap"];

/// Per `(n, metric)` mean and standard error over tasks, in order of first
/// appearance.
pub fn metric_summaries(rows: &[ReportRow]) -> Vec<Value> {
    let mut keys: Vec<(usize, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.n, r.metric.as_str())) {
            keys.push((r.n, r.metric.as_str()));
        }
    }
    keys.into_iter()
        .map(|(n, metric)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.metric == metric)
                .filter_map(|r| r.value)
                .collect();
            let failed = rows
                .iter()
                .filter(|r| r.n == n && r.metric == metric && r.error.is_some())
                .count();
            let count = values.len();
            let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
            let std_error = mean.filter(|_| count > 1).map(|m| {
                let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (count - 1) as f64;
                (var / count as f64).sqrt()
            });
            json!({ "n": n, "metric": metric, "count": count, "failed": failed, "mean": mean, "std_error": std_error })
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// The config as echoed in the summary: resolved seed, no output location.
pub fn config_echo(config: &ExperimentConfig, seed: u64) -> Value {
    let mut echo = config.clone();
    echo.estimator.seed = seed;
    echo.output = None;
    serde_json::to_value(echo).expect("config serializes")
}
