use std::time::Instant;

use phr_core::calibration::{calibration_error, CalibrationConfig, CalibrationReport};
use phr_core::cgm::{Cgm, Context};
use phr_core::conjugate::{ConjugateLinearModel, DirichletCategoricalModel, LinearTruth};
use phr_core::estimators::{
    estimate_error_rate, estimate_mhr, estimate_mutual_information, estimate_phr,
};
use phr_core::textprompt::{balanced_sample, LabeledTextDataset};
use phr_core::{EstimatorConfig, StreamKey, TextContext};
use phr_llm::LlmCgm;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode};
use crate::report::ReportRow;

/// Stream `0` of a task generates its data, `1 + i` seeds the estimators at
/// the `i`-th context size and `AUX + i` drives any other randomness there.
const AUX: u64 = 1 << 32;
const CALIBRATION: u64 = 1 << 40;

/// Outcome of one task at one context size.
#[derive(Debug, Clone)]
pub struct Cell {
    pub task_id: usize,
    pub n: usize,
    pub rows: Vec<ReportRow>,
    pub wall_ms: u128,
    /// `(estimate, standard error, oracle)` in `oracle-compare` mode.
    pub oracle: Option<Result<(f64, f64, f64), String>>,
}

struct Metric {
    name: &'static str,
    value: f64,
    std_error: Option<f64>,
}

fn metric(name: &'static str, value: f64, std_error: Option<f64>) -> Metric {
    Metric {
        name,
        value,
        std_error,
    }
}

fn binomial_se(p: f64, k: usize) -> f64 {
    (p * (1.0 - p) / k as f64).sqrt()
}

fn estimator_at(config: &ExperimentConfig, key: StreamKey, i: usize) -> EstimatorConfig {
    config.estimator.with_seed(key.child(1 + i as u64).derive_seed())
}

/// Metrics every model supports.
fn generic_metrics<C: Cgm<Scalar = f64>>(
    mode: Mode,
    cgm: &C,
    query: &C::Query,
    context: &Context<C>,
    eval: &Context<C>,
    truth: Option<&C::Response>,
    est: &EstimatorConfig,
) -> Result<Vec<Metric>, String> {
    let k = est.num_samples;
    Ok(match mode {
        Mode::Phr => {
            let r = estimate_phr(query, context, cgm, est).map_err(|e| e.to_string())?;
            vec![metric("phr", r.value, Some(r.std_error))]
        }
        Mode::Mhr => {
            let v = estimate_mhr(query, context, eval, cgm, k, est.epsilon, &mut est.predictive_rng())
                .map_err(|e| e.to_string())?;
            vec![metric("mhr", v, Some(binomial_se(v, k)))]
        }
        Mode::ErrorRate => {
            let truth = truth.ok_or("no ground-truth response for this task")?;
            let v = estimate_error_rate(query, truth, context, cgm, k, &mut est.predictive_rng())
                .map_err(|e| e.to_string())?;
            vec![metric("error_rate", v, Some(binomial_se(v, k)))]
        }
        Mode::Mi => {
            let mi = estimate_mutual_information(query, context, cgm, est).map_err(|e| e.to_string())?;
            vec![
                metric("mi", mi.value, Some(mi.std_error)),
                metric("predictive_entropy", mi.predictive.value, Some(mi.predictive.std_error)),
                metric("aleatoric_entropy", mi.aleatoric.value, Some(mi.aleatoric.std_error)),
            ]
        }
        Mode::Thr | Mode::Calibration | Mode::OracleCompare => {
            unreachable!("mode {} is model-specific", mode.name())
        }
    })
}

fn cell(
    config: &ExperimentConfig,
    task_id: usize,
    n: usize,
    f: impl FnOnce() -> Result<(Vec<Metric>, Option<(f64, f64, f64)>), String>,
) -> Cell {
    let start = Instant::now();
    let outcome = f();
    let wall_ms = start.elapsed().as_millis();
    let epsilon = config.estimator.epsilon;
    let (rows, oracle) = match outcome {
        Ok((metrics, oracle)) => (
            metrics
                .into_iter()
                .map(|m| ReportRow {
                    task_id: Some(task_id),
                    n,
                    epsilon,
                    metric: m.name.to_string(),
                    value: Some(m.value),
                    std_error: m.std_error,
                    error: None,
                })
                .collect(),
            oracle.map(Ok),
        ),
        Err(message) => (
            vec![ReportRow {
                task_id: Some(task_id),
                n,
                epsilon,
                metric: config.mode.name().to_string(),
                value: None,
                std_error: None,
                error: Some(message.clone()),
            }],
            (config.mode == Mode::OracleCompare).then_some(Err(message)),
        ),
    };
    Cell {
        task_id,
        n,
        rows,
        wall_ms,
        oracle,
    }
}

fn per_task<F>(config: &ExperimentConfig, seed: u64, task: F) -> Vec<Cell>
where
    F: Fn(usize, StreamKey) -> Vec<Cell> + Sync,
{
    let root = StreamKey::new(seed);
    let per: Vec<Vec<Cell>> = (0..config.num_tasks)
        .into_par_iter()
        .map(|t| task(t, root.child(t as u64)))
        .collect();
    per.into_iter().flatten().collect()
}

pub fn run_linear(config: &ExperimentConfig, model: &ConjugateLinearModel<f64>, seed: u64) -> Vec<Cell> {
    let max_n = *config.context_sizes.last().expect("validated non-empty");
    per_task(config, seed, |t, key| {
        let mut rng = key.child(0).rng();
        let f = model.sample_mechanism(&mut rng);
        let full = model.generate_context(&f, max_n, &mut rng);
        let x = model.sample_query(&mut rng);
        let eval = if config.mode == Mode::Mhr {
            model.generate_context(&f, config.eval_size, &mut rng)
        } else {
            Default::default()
        };
        config
            .context_sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                cell(config, t, n, || {
                    let ctx = full.prefix(n);
                    let est = estimator_at(config, key, i);
                    let eps = est.epsilon;
                    match config.mode {
                        Mode::Thr => {
                            let v = model.analytic_thr(&ctx, &f, x, eps).map_err(|e| e.to_string())?;
                            Ok((vec![metric("thr", v, None)], None))
                        }
                        Mode::OracleCompare => {
                            let r = estimate_phr(&x, &ctx, model, &est).map_err(|e| e.to_string())?;
                            let samples = config.analytic_samples;
                            let a = model
                                .analytic_phr(&ctx, x, eps, samples, &mut key.child(AUX + i as u64).rng())
                                .map_err(|e| e.to_string())?;
                            Ok((
                                vec![
                                    metric("phr_estimate", r.value, Some(r.std_error)),
                                    metric("phr_analytic", a, Some(binomial_se(a, samples))),
                                ],
                                Some((r.value, r.std_error, a)),
                            ))
                        }
                        Mode::Mi => {
                            let mut m = generic_metrics(config.mode, model, &x, &ctx, &eval, None, &est)?;
                            let exact = model.analytic_mi(&ctx, x).map_err(|e| e.to_string())?;
                            m.push(metric("mi_analytic", exact, None));
                            Ok((m, None))
                        }
                        mode => Ok((generic_metrics(mode, model, &x, &ctx, &eval, None, &est)?, None)),
                    }
                })
            })
            .collect()
    })
}

pub fn run_categorical(config: &ExperimentConfig, model: &DirichletCategoricalModel<f64>, seed: u64) -> Vec<Cell> {
    let max_n = *config.context_sizes.last().expect("validated non-empty");
    per_task(config, seed, |t, key| {
        let mut rng = key.child(0).rng();
        let f = model.sample_mechanism(&mut rng);
        let full = model.generate_context(&f, max_n, &mut rng);
        let truth = model.sample_label_given(&f, &mut rng);
        let eval = if config.mode == Mode::Mhr {
            model.generate_context(&f, config.eval_size, &mut rng)
        } else {
            Default::default()
        };
        config
            .context_sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                cell(config, t, n, || {
                    let ctx = full.prefix(n);
                    let est = estimator_at(config, key, i);
                    let eps = est.epsilon;
                    match config.mode {
                        Mode::Thr => {
                            let v = model.analytic_thr(&ctx, &f, eps).map_err(|e| e.to_string())?;
                            Ok((vec![metric("thr", v, None)], None))
                        }
                        Mode::OracleCompare => {
                            let r = estimate_phr(&(), &ctx, model, &est).map_err(|e| e.to_string())?;
                            let a = model
                                .categorical_phr_bruteforce(
                                    &ctx,
                                    eps,
                                    config.analytic_samples,
                                    &mut key.child(AUX + i as u64).rng(),
                                )
                                .map_err(|e| e.to_string())?;
                            Ok((
                                vec![
                                    metric("phr_estimate", r.value, Some(r.std_error)),
                                    metric("phr_analytic", a, None),
                                ],
                                Some((r.value, r.std_error, a)),
                            ))
                        }
                        mode => Ok((generic_metrics(mode, model, &(), &ctx, &eval, Some(&truth), &est)?, None)),
                    }
                })
            })
            .collect()
    })
}

/// Split of a labelled dataset into one query, held-out examples and the
/// pool contexts are drawn from.
struct TextTask {
    query: String,
    truth: String,
    eval: TextContext,
    pool: Result<LabeledTextDataset, String>,
}

fn text_task<R: Rng + ?Sized>(dataset: &LabeledTextDataset, eval_size: usize, rng: &mut R) -> TextTask {
    let q = rng.random_range(0..dataset.len());
    let record = &dataset.records()[q];
    let rest = dataset.without(q);
    let held: Vec<usize> = if eval_size > 0 {
        index::sample(rng, rest.len(), eval_size.min(rest.len())).into_vec()
    } else {
        Vec::new()
    };
    let eval: TextContext = held
        .iter()
        .map(|&i| (rest.records()[i].text.clone(), rest.records()[i].label.clone()))
        .collect();
    let pool = if held.is_empty() {
        Ok(rest)
    } else {
        let records = rest
            .records()
            .iter()
            .enumerate()
            .filter(|(i, _)| !held.contains(i))
            .map(|(_, r)| r.clone())
            .collect();
        LabeledTextDataset::new(records).map_err(|e| e.to_string())
    };
    TextTask {
        query: record.text.clone(),
        truth: record.label.clone(),
        eval,
        pool,
    }
}

pub fn run_llm(config: &ExperimentConfig, model: &LlmCgm, dataset: &LabeledTextDataset, seed: u64) -> Vec<Cell> {
    let eval_size = if config.mode == Mode::Mhr { config.eval_size } else { 0 };
    per_task(config, seed, |t, key| {
        let task = text_task(dataset, eval_size, &mut key.child(0).rng());
        config
            .context_sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                cell(config, t, n, || {
                    let pool = task.pool.as_ref().map_err(|e| e.clone())?;
                    let ctx = balanced_sample(pool, n, &mut key.child(AUX + i as u64).rng())
                        .map_err(|e| e.to_string())?;
                    let est = estimator_at(config, key, i);
                    let m = generic_metrics(config.mode, model, &task.query, &ctx, &task.eval, Some(&task.truth), &est)?;
                    Ok((m, None))
                })
            })
            .collect()
    })
}

pub fn run_calibration(
    config: &ExperimentConfig,
    model: &ConjugateLinearModel<f64>,
    seed: u64,
) -> Vec<(usize, u128, Result<CalibrationReport, String>)> {
    let truth = LinearTruth { model: model.clone() };
    let root = StreamKey::new(seed);
    config
        .context_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = config.calibration;
            let cc = CalibrationConfig {
                num_tasks: config.num_tasks,
                context_size: n,
                extend_by: s.extend_by,
                quantile_samples: s.quantile_samples,
                coverage_samples: s.coverage_samples,
                q_grid_size: s.q_grid_size,
                seed: root.child(CALIBRATION + i as u64).derive_seed(),
            };
            let start = Instant::now();
            let report = calibration_error(&truth, model, &cc).map_err(|e| e.to_string());
            (n, start.elapsed().as_millis(), report)
        })
        .collect()
}
