use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rates::{run_replicates, sample_imagined_context};
use super::{EstimateError, EstimatorConfig, RateEstimate};
use crate::cgm::{Cgm, Context};
use num_traits::Float;

/// Total predictive entropy `-E[log p(y | x, D_n)]`, estimated from
/// `num_samples` draws.
///
/// `per_replicate` holds the individual surprisals `-log p(y_k | x, D_n)`,
/// so `std_error` is the per-draw standard error.
pub fn estimate_predictive_entropy<C: Cgm, R: Rng + ?Sized>(
    query: &C::Query,
    base: &Context<C>,
    cgm: &C,
    num_samples: usize,
    rng: &mut R,
) -> Result<RateEstimate<C::Scalar>, EstimateError> {
    if num_samples == 0 {
        return Err(EstimateError::InvalidConfig(
            "num_samples must be at least 1".into(),
        ));
    }
    let draws = cgm.sample_responses(query, base, num_samples, rng)?;
    let scores = cgm.log_probs(&draws, query, base)?;
    Ok(RateEstimate::from_replicates(
        scores.into_iter().map(|s| -s).collect(),
    ))
}

/// Aleatoric entropy: the predictive entropy under imagined extensions of
/// the context, averaged over `num_contexts` replicates.
pub fn estimate_aleatoric_entropy<C: Cgm>(
    query: &C::Query,
    base: &Context<C>,
    cgm: &C,
    config: &EstimatorConfig,
) -> Result<RateEstimate<C::Scalar>, EstimateError> {
    config.validate()?;
    run_replicates(config, |j| {
        let mut rng = config.replicate_rng(j);
        let extended = sample_imagined_context(base, cgm, config.extend_by, &mut rng)?;
        let h = estimate_predictive_entropy(query, &extended, cgm, config.num_samples, &mut rng)?;
        Ok(h.value)
    })
}

/// Epistemic uncertainty as the gap between total and aleatoric entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation<T> {
    /// `predictive.value - aleatoric.value`. Not clamped at zero.
    pub value: T,
    /// Independent-streams combination of the two standard errors.
    pub std_error: T,
    pub predictive: RateEstimate<T>,
    pub aleatoric: RateEstimate<T>,
}

pub fn estimate_mutual_information<C: Cgm>(
    query: &C::Query,
    base: &Context<C>,
    cgm: &C,
    config: &EstimatorConfig,
) -> Result<MutualInformation<C::Scalar>, EstimateError> {
    config.validate()?;
    let predictive = estimate_predictive_entropy(
        query,
        base,
        cgm,
        config.num_samples,
        &mut config.predictive_rng(),
    )?;
    let aleatoric = estimate_aleatoric_entropy(query, base, cgm, config)?;
    let value = predictive.value - aleatoric.value;
    let std_error = (predictive.std_error * predictive.std_error
        + aleatoric.std_error * aleatoric.std_error)
        .sqrt();
    Ok(MutualInformation {
        value,
        std_error,
        predictive,
        aleatoric,
    })
}

