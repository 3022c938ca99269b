use rand::Rng;
use rayon::prelude::*;

use super::{empirical_quantile, EstimateError, EstimatorConfig, RateEstimate};
use crate::cgm::{Cgm, Context};
use crate::scalar::Scalar;

/// Extends `base` with `extend_by` examples drawn one at a time from
/// `p(x, y | current context)`.
pub fn sample_imagined_context<C: Cgm, R: Rng + ?Sized>(
    base: &Context<C>,
    cgm: &C,
    extend_by: usize,
    rng: &mut R,
) -> Result<Context<C>, EstimateError> {
    let mut context = base.clone();
    context.reserve(extend_by);
    match cgm.extend_context(&mut context, extend_by, rng) {
        Ok(()) => Ok(context),
        Err(source) => Err(EstimateError::Imagine {
            index: context.len() + 1,
            source,
        }),
    }
}

/// Finite-context true hallucination rate of `query`.
///
/// The ε-quantile of `log p(y | x, extended)` is estimated from `num_samples`
/// draws under `extended`; the rate is the fraction of `num_samples` fresh
/// draws under `base` whose log-probability under `extended` is strictly
/// below it.
pub fn estimate_thr<C: Cgm, R: Rng + ?Sized>(
    query: &C::Query,
    base: &Context<C>,
    extended: &Context<C>,
    cgm: &C,
    num_samples: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<C::Scalar, EstimateError> {
    let quantile_draws = cgm.sample_responses(query, extended, num_samples, rng)?;
    let scores = cgm.log_probs(&quantile_draws, query, extended)?;
    let threshold = empirical_quantile(&scores, epsilon)?;

    let fresh = cgm.sample_responses(query, base, num_samples, rng)?;
    let fresh_scores = cgm.log_probs(&fresh, query, extended)?;
    let hallucinations = fresh_scores.iter().filter(|&&s| s < threshold).count();
    Ok(fraction(hallucinations, num_samples))
}

/// Posterior hallucination rate of `query` given `base`.
///
/// Each of the `num_contexts` replicates extends `base` by `extend_by`
/// imagined examples and evaluates [`estimate_thr`] against the extension.
/// Replicate `j` draws from its own stream, so the result does not depend on
/// the rayon pool size.
pub fn estimate_phr<C: Cgm>(
    query: &C::Query,
    base: &Context<C>,
    cgm: &C,
    config: &EstimatorConfig,
) -> Result<RateEstimate<C::Scalar>, EstimateError> {
    config.validate()?;
    run_replicates(config, |j| {
        let mut rng = config.replicate_rng(j);
        let extended = sample_imagined_context(base, cgm, config.extend_by, &mut rng)?;
        estimate_thr(
            query,
            base,
            &extended,
            cgm,
            config.num_samples,
            config.epsilon,
            &mut rng,
        )
    })
}

/// Model hallucination rate: the likely set is taken from the model
/// conditioned on `base` followed by the held-out `eval` examples.
pub fn estimate_mhr<C: Cgm, R: Rng + ?Sized>(
    query: &C::Query,
    base: &Context<C>,
    eval: &Context<C>,
    cgm: &C,
    num_samples: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<C::Scalar, EstimateError> {
    let combined = base.concat(eval);
    estimate_thr(query, base, &combined, cgm, num_samples, epsilon, rng)
}

/// Fraction of sampled responses that differ from `ground_truth`.
pub fn estimate_error_rate<C: Cgm, R: Rng + ?Sized>(
    query: &C::Query,
    ground_truth: &C::Response,
    base: &Context<C>,
    cgm: &C,
    num_samples: usize,
    rng: &mut R,
) -> Result<C::Scalar, EstimateError> {
    if num_samples == 0 {
        return Err(EstimateError::InvalidConfig(
            "num_samples must be at least 1".into(),
        ));
    }
    let draws = cgm.sample_responses(query, base, num_samples, rng)?;
    let wrong = draws.iter().filter(|y| *y != ground_truth).count();
    Ok(fraction(wrong, num_samples))
}

pub(super) fn fraction<T: Scalar>(count: usize, total: usize) -> T {
    T::from_count(count) / T::from_count(total)
}

/// Runs `replicate(j)` for `j in 0..M` in parallel and aggregates in index
/// order.
pub(super) fn run_replicates<T, F>(
    config: &EstimatorConfig,
    replicate: F,
) -> Result<RateEstimate<T>, EstimateError>
where
    T: Scalar,
    F: Fn(usize) -> Result<T, EstimateError> + Sync,
{
    let results: Vec<Result<T, EstimateError>> = (0..config.num_contexts)
        .into_par_iter()
        .map(&replicate)
        .collect();
    let mut values = Vec::with_capacity(results.len());
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(source) => {
                return Err(EstimateError::Replicate {
                    replicate: j,
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(RateEstimate::from_replicates(values))
}
