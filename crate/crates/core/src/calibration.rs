//! Calibration of the resampled predictive distribution.
//!
//! A response from the resampled predictive `p̂(y | x, D_n)` is drawn by
//! first extending the context with imagined examples and then sampling `y`
//! under the extended context. If the model is a coherent Bayesian
//! predictor, `p̂` equals the direct predictive and its `q`-quantiles cover
//! fresh data from the true process with frequency `q`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgm::{Cgm, CgmError, Context};
use crate::data::ContextDataset;
use crate::estimators::{quantile_rank, sample_imagined_context, EstimateError};
use crate::scalar::Scalar;
use crate::stream::StreamKey;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least one task")]
    InsufficientTasks,
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),
    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: EstimateError,
    },
}

/// One evaluation task drawn from the true data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTask<X, Y> {
    pub context: ContextDataset<X, Y>,
    pub query: X,
    /// Responses at `query` drawn from the true mechanism.
    pub fresh_responses: Vec<Y>,
}

/// Source of ground-truth tasks.
pub trait TruthGenerator: Sync {
    type Query;
    type Response;

    fn generate<R: Rng + ?Sized>(
        &self,
        context_size: usize,
        num_fresh: usize,
        rng: &mut R,
    ) -> Result<CalibrationTask<Self::Query, Self::Response>, CgmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub num_tasks: usize,
    /// Context length `n` of every task.
    pub context_size: usize,
    /// Imagined examples appended before sampling (N - n).
    pub extend_by: usize,
    /// Draws from `p̂` per task used to estimate its quantiles.
    pub quantile_samples: usize,
    /// Fresh true responses per task.
    pub coverage_samples: usize,
    pub q_grid_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CalibrationConfig {
    /// 200 quantile samples, 200 coverage samples, 200 grid points, N - n = 30.
    pub fn standard(num_tasks: usize, context_size: usize) -> Self {
        Self {
            num_tasks,
            context_size,
            extend_by: 30,
            quantile_samples: 200,
            coverage_samples: 200,
            q_grid_size: 200,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub q_grid: Vec<f64>,
    pub coverage: Vec<f64>,
    /// Mean of `|coverage(q) - q|` over the grid.
    pub error: f64,
    pub num_tasks: usize,
    /// One set of `p̂` draws per task is shared across every grid point.
    pub shared_quantile_samples: bool,
}

impl CalibrationReport {
    pub fn abs_gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.q_grid
            .iter()
            .zip(&self.coverage)
            .map(|(q, c)| (c - q).abs())
    }
}

/// `size` equally spaced levels `i / (size + 1)`, `i = 1..=size`.
pub fn q_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|i| i as f64 / (size + 1) as f64).collect()
}

/// One draw from `p̂(y | x, D_n)`.
pub fn resampled_response<C: Cgm, R: Rng + ?Sized>(
    query: &C::Query,
    base: &Context<C>,
    cgm: &C,
    extend_by: usize,
    rng: &mut R,
) -> Result<C::Response, EstimateError> {
    let extended = sample_imagined_context(base, cgm, extend_by, rng)?;
    Ok(cgm.sample_response(query, &extended, rng)?)
}

/// Coverage of the resampled predictive's quantiles against fresh data.
///
/// Tasks run in parallel on per-task streams; counts are reduced in task
/// order.
pub fn calibration_error<T, G, C>(
    truth: &G,
    cgm: &C,
    config: &CalibrationConfig,
) -> Result<CalibrationReport, CalibrationError>
where
    T: Scalar,
    G: TruthGenerator<Query = T, Response = T>,
    C: Cgm<Query = T, Response = T, Scalar = T>,
{
    if config.num_tasks == 0 {
        return Err(CalibrationError::InsufficientTasks);
    }
    if config.quantile_samples == 0 || config.coverage_samples == 0 || config.q_grid_size == 0 {
        return Err(CalibrationError::InvalidConfig(
            "sample counts and grid size must be positive".into(),
        ));
    }
    let grid = q_grid(config.q_grid_size);
    let ranks: Vec<usize> = grid
        .iter()
        .map(|&q| quantile_rank(config.quantile_samples, q))
        .collect();
    let key = StreamKey::new(config.seed);

    let per_task: Vec<Result<Vec<usize>, CalibrationError>> = (0..config.num_tasks)
        .into_par_iter()
        .map(|task| {
            let wrap = |source: EstimateError| CalibrationError::Task { task, source };
            let mut rng = key.child(task as u64).rng();
            let t = truth
                .generate(config.context_size, config.coverage_samples, &mut rng)
                .map_err(|e| wrap(e.into()))?;
            let mut draws = (0..config.quantile_samples)
                .map(|_| resampled_response(&t.query, &t.context, cgm, config.extend_by, &mut rng))
                .collect::<Result<Vec<T>, _>>()
                .map_err(wrap)?;
            if draws.iter().any(|v| v.is_nan()) {
                return Err(wrap(EstimateError::NanSample));
            }
            draws.sort_by(|a, b| a.partial_cmp(b).expect("NaN rejected"));
            Ok(ranks
                .iter()
                .map(|&r| {
                    let q = draws[r - 1];
                    t.fresh_responses.iter().filter(|&&y| y <= q).count()
                })
                .collect())
        })
        .collect();

    let mut totals = vec![0usize; grid.len()];
    for r in per_task {
        for (acc, c) in totals.iter_mut().zip(r?) {
            *acc += c;
        }
    }
    let denom = (config.num_tasks * config.coverage_samples) as f64;
    let coverage: Vec<f64> = totals.iter().map(|&c| c as f64 / denom).collect();
    let gap_sum: f64 = grid.iter().zip(&coverage).map(|(q, c)| (c - q).abs()).sum();
    Ok(CalibrationReport {
        error: gap_sum / grid.len() as f64,
        q_grid: grid,
        coverage,
        num_tasks: config.num_tasks,
        shared_quantile_samples: true,
    })
}
