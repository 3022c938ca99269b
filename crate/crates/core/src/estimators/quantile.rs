use crate::estimators::EstimateError;
use crate::scalar::Scalar;

/// One-based rank of the lower empirical ε-quantile among `len` samples:
/// `max(1, ceil(ε · len))`.
///
/// Products that land within a few ulps of an integer are treated as that
/// integer, so `0.07 · 100` gives rank 7 rather than 8.
pub fn quantile_rank(len: usize, epsilon: f64) -> usize {
    let target = epsilon * len as f64;
    let nearest = target.round();
    let rank = if (target - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        target.ceil()
    };
    (rank as usize).clamp(1, len.max(1))
}

/// Lower empirical ε-quantile: the order statistic of rank
/// [`quantile_rank`] in the ascending sort of `samples`.
pub fn empirical_quantile<T: Scalar>(samples: &[T], epsilon: f64) -> Result<T, EstimateError> {
    if samples.is_empty() {
        return Err(EstimateError::NoQuantileSamples);
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(EstimateError::NanSample);
    }
    let rank = quantile_rank(samples.len(), epsilon);
    let mut sorted = samples.to_vec();
    let (_, nth, _) = sorted.select_nth_unstable_by(rank - 1, |a, b| {
        a.partial_cmp(b).expect("NaN rejected above")
    });
    Ok(*nth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_samples() {
        let xs = vec![3.7f64; 20];
        assert_eq!(empirical_quantile(&xs, 0.05).unwrap(), 3.7);
    }

    #[test]
    fn first_order_statistic() {
        let xs: Vec<f64> = (1..=20).rev().map(f64::from).collect();
        assert_eq!(empirical_quantile(&xs, 0.05).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&xs, 0.5).unwrap(), 10.0);
        assert_eq!(empirical_quantile(&xs, 0.999).unwrap(), 20.0);
    }

    #[test]
    fn rank_is_robust_to_decimal_epsilons() {
        assert_eq!(quantile_rank(100, 0.07), 7);
        assert_eq!(quantile_rank(2000, 0.05), 100);
        assert_eq!(quantile_rank(10, 0.01), 1);
        assert_eq!(quantile_rank(3, 0.5), 2);
    }

    #[test]
    fn empty_and_nan_inputs() {
        assert!(matches!(
            empirical_quantile::<f64>(&[], 0.1),
            Err(EstimateError::NoQuantileSamples)
        ));
        assert!(matches!(
            empirical_quantile(&[1.0, f64::NAN], 0.1),
            Err(EstimateError::NanSample)
        ));
        assert_eq!(
            empirical_quantile(&[f64::NEG_INFINITY, 0.0], 0.5).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn standard_normal_five_percent_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| f64::standard_normal(&mut rng)).collect();
        // Inverse normal CDF at 0.05.
        let q = empirical_quantile(&xs, 0.05).unwrap();
        assert!((q + 1.644_853_626_951_472).abs() < 0.02, "q = {q}");
    }
}
