//! Experiment runner: reads a JSON experiment config, runs the requested
//! estimator over generated or dataset-backed tasks and writes CSV reports
//! plus a JSON summary.
//!
//! Output directory contents:
//! - `report.csv`: one row per task, context size and metric
//! - `summary.json`: config echo, seed, library version, per-metric means
//! - `timings.csv`: wall time per task and context size
//! - `oracle_compare.csv` (mode `oracle-compare`)
//! - `calibration_n{n}.csv` (mode `calibration`)
//!
//! Everything except `timings.csv` is a pure function of config and seed.

pub mod config;
mod experiments;
pub mod report;

use std::path::{Path, PathBuf};

use phr_core::conjugate::{ConjugateLinearModel, DirichletCategoricalModel};
use phr_core::textprompt::{filter_by_length, load_dataset, relabel, DatasetFormat, LabeledTextDataset};
use phr_llm::LlmCgm;
use serde_json::json;
use thiserror::Error;

pub use config::{ExperimentConfig, ModelConfig, Mode};
use experiments::Cell;
pub use report::{OracleFit, ReportRow};
use report::{CalibrationRow, OracleRow, TimingRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Overrides the config's `output`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<ReportRow>,
    pub summary: serde_json::Value,
    /// Rows that carry an error instead of a value.
    pub failures: usize,
}

pub fn output_dir(config: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("phr-out"))
}

fn load_text_dataset(cfg: &config::DatasetConfig) -> Result<LabeledTextDataset, CliError> {
    let invalid = |e: phr_core::textprompt::DatasetError| CliError::Validation(format!("dataset {}: {e}", cfg.path.display()));
    let format = match cfg.format {
        Some(f) => f,
        None => DatasetFormat::from_path(&cfg.path).map_err(invalid)?,
    };
    let mut ds = load_dataset(&cfg.path, format).map_err(invalid)?;
    if !cfg.relabel.is_empty() {
        let mapping: Vec<(&str, &str)> = cfg.relabel.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        ds = relabel(&ds, &mapping);
    }
    if let Some(max) = cfg.max_length {
        ds = filter_by_length(&ds, max, cfg.length_mode).0;
    }
    if ds.len() < 2 {
        return Err(CliError::Validation(format!("dataset {} has fewer than two usable records", cfg.path.display())));
    }
    Ok(ds)
}

/// Runs an experiment and writes its reports.
///
/// Task failures do not abort the run; they become rows with an `error` and
/// are counted in [`RunOutcome::failures`].
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let out_dir = output_dir(config, opts);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let seed = opts.seed;

    let mut cells: Vec<Cell> = Vec::new();
    let mut calibration = Vec::new();
    match &config.model {
        ModelConfig::ConjugateLinear {
            degree,
            noise_std,
            query_std,
            prior_scale,
            query_distribution,
        } => {
            let model = ConjugateLinearModel::new(*degree, *noise_std, *query_std)
                .and_then(|m| m.with_prior_scale(*prior_scale))
                .map_err(|e| CliError::Validation(e.to_string()))?
                .with_query_distribution(*query_distribution);
            if config.mode == Mode::Calibration {
                calibration = pool.install(|| experiments::run_calibration(config, &model, seed));
            } else {
                cells = pool.install(|| experiments::run_linear(config, &model, seed));
            }
        }
        ModelConfig::ConjugateCategorical { labels, alpha } => {
            let model = DirichletCategoricalModel::new(labels.clone(), *alpha)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            cells = pool.install(|| experiments::run_categorical(config, &model, seed));
        }
        ModelConfig::Llm { endpoint, dataset } => {
            let ds = load_text_dataset(dataset)?;
            let model = LlmCgm::new((**endpoint).clone()).map_err(|e| CliError::Validation(e.to_string()))?;
            cells = pool.install(|| experiments::run_llm(config, &model, &ds, seed));
        }
    }

    std::fs::create_dir_all(&out_dir)?;
    let epsilon = config.estimator.epsilon;
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut timings: Vec<TimingRow> = Vec::new();
    let mut calibration_summary = Vec::new();
    for (n, wall_ms, report) in &calibration {
        timings.push(TimingRow {
            task_id: None,
            n: *n,
            wall_ms: *wall_ms,
        });
        match report {
            Ok(r) => {
                let csv_rows: Vec<CalibrationRow> = r
                    .q_grid
                    .iter()
                    .zip(&r.coverage)
                    .map(|(&q, &c)| CalibrationRow {
                        q,
                        coverage: c,
                        abs_gap: (c - q).abs(),
                    })
                    .collect();
                report::write_csv(
                    &out_dir.join(format!("calibration_n{n}.csv")),
                    &csv_rows,
                    report::CALIBRATION_HEADER,
                )?;
                rows.push(ReportRow {
                    task_id: None,
                    n: *n,
                    epsilon,
                    metric: "calibration_error".into(),
                    value: Some(r.error),
                    std_error: None,
                    error: None,
                });
                calibration_summary.push(json!({
                    "n": n,
                    "error": r.error,
                    "num_tasks": r.num_tasks,
                    "shared_quantile_samples": r.shared_quantile_samples,
                }));
            }
            Err(e) => rows.push(ReportRow {
                task_id: None,
                n: *n,
                epsilon,
                metric: "calibration_error".into(),
                value: None,
                std_error: None,
                error: Some(e.clone()),
            }),
        }
    }

    let mut oracle_rows = Vec::new();
    for c in &cells {
        rows.extend(c.rows.iter().cloned());
        timings.push(TimingRow {
            task_id: Some(c.task_id),
            n: c.n,
            wall_ms: c.wall_ms,
        });
        if let Some(o) = &c.oracle {
            oracle_rows.push(match o {
                Ok((est, se, analytic)) => OracleRow {
                    task_id: c.task_id,
                    n: c.n,
                    phr_estimate: Some(*est),
                    std_error: Some(*se),
                    phr_analytic: Some(*analytic),
                    error: None,
                },
                Err(e) => OracleRow {
                    task_id: c.task_id,
                    n: c.n,
                    phr_estimate: None,
                    std_error: None,
                    phr_analytic: None,
                    error: Some(e.clone()),
                },
            });
        }
    }

    report::write_csv(&out_dir.join("report.csv"), &rows, report::REPORT_HEADER)?;
    report::write_csv(&out_dir.join("timings.csv"), &timings, report::TIMING_HEADER)?;

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let mut summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "mode": config.mode.name(),
        "model": config.model.name(),
        "config": report::config_echo(config, seed),
        "rows": rows.len(),
        "failures": failures,
        "metrics": report::metric_summaries(&rows),
    });
    if config.mode == Mode::OracleCompare {
        report::write_csv(&out_dir.join("oracle_compare.csv"), &oracle_rows, report::ORACLE_HEADER)?;
        summary["oracle"] = json!(oracle_fits(config, &oracle_rows));
    }
    if config.mode == Mode::Calibration {
        summary["calibration"] = json!(calibration_summary);
    }
    report::write_summary(&out_dir.join("summary.json"), &summary)?;

    Ok(RunOutcome {
        out_dir,
        rows,
        summary,
        failures,
    })
}

fn oracle_fits(config: &ExperimentConfig, rows: &[OracleRow]) -> Vec<serde_json::Value> {
    let pairs = |n: Option<usize>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| n.is_none_or(|n| r.n == n))
            .filter_map(|r| Some((r.phr_estimate?, r.phr_analytic?)))
            .collect()
    };
    let mut fits: Vec<serde_json::Value> = config
        .context_sizes
        .iter()
        .map(|&n| json!({ "n": n, "fit": OracleFit::from_pairs(&pairs(Some(n))) }))
        .collect();
    fits.push(json!({ "n": "all", "fit": OracleFit::from_pairs(&pairs(None)) }));
    fits
}

/// Reads the config at `path` and runs it.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    run(&ExperimentConfig::load(path)?, opts)
}
