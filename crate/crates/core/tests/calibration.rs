mod common;

use common::*;
use phr_core::calibration::*;
use phr_core::cgm::{Cgm, CgmError};
use phr_core::conjugate::LinearTruth;
use phr_core::{ContextDataset, LinearModel, RegressionContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tasks with an empty context and fresh responses from `N(0, 1)`.
struct StandardNormalTruth;

impl TruthGenerator for StandardNormalTruth {
    type Query = f64;
    type Response = f64;

    fn generate<R: rand::Rng + ?Sized>(
        &self,
        _context_size: usize,
        num_fresh: usize,
        rng: &mut R,
    ) -> Result<CalibrationTask<f64, f64>, CgmError> {
        Ok(CalibrationTask {
            context: ContextDataset::new(),
            query: 0.0,
            fresh_responses: (0..num_fresh)
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect(),
        })
    }
}

#[test]
fn matching_model_is_calibrated() {
    let config = CalibrationConfig::standard(100, 0).with_seed(1);
    let report = calibration_error(&StandardNormalTruth, &FixedGaussian { mean: 0.0, sd: 1.0 }, &config).unwrap();
    assert_eq!(report.q_grid.len(), 200);
    assert!(report.shared_quantile_samples);
    assert!(report.error < 0.02, "{}", report.error);
}

#[test]
fn shifted_model_has_known_coverage() {
    let config = CalibrationConfig {
        num_tasks: 50,
        context_size: 0,
        extend_by: 0,
        quantile_samples: 2001,
        coverage_samples: 2000,
        q_grid_size: 1,
        seed: 2,
    };
    let report = calibration_error(&StandardNormalTruth, &FixedGaussian { mean: 1.0, sd: 1.0 }, &config).unwrap();
    assert_eq!(report.q_grid, vec![0.5]);
    // Coverage of the median of N(1, 1) under N(0, 1) is Φ(1).
    let phi_1 = 0.841344746068543;
    assert!((report.coverage[0] - phi_1).abs() < 0.01, "{}", report.coverage[0]);
    assert!((report.error - (phi_1 - 0.5)).abs() < 0.01);
}

#[test]
fn conjugate_model_is_calibrated() {
    let model = LinearModel::one_dimensional();
    let truth = LinearTruth { model: model.clone() };
    for n in [1, 2, 8] {
        let config = CalibrationConfig::standard(1000, n).with_seed(3);
        let report = calibration_error(&truth, &model, &config).unwrap();
        assert!(report.error < 0.04, "n = {n}: {}", report.error);
        assert!(report.coverage.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn calibration_is_deterministic_across_pools() {
    let model = LinearModel::one_dimensional();
    let truth = LinearTruth { model: model.clone() };
    let config = CalibrationConfig::standard(12, 2).with_seed(4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| calibration_error(&truth, &model, &config).unwrap())
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn rejects_empty_configs() {
    let model = LinearModel::one_dimensional();
    let truth = LinearTruth { model: model.clone() };
    let config = CalibrationConfig::standard(0, 2);
    assert!(matches!(calibration_error(&truth, &model, &config), Err(CalibrationError::InsufficientTasks)));
    let config = CalibrationConfig { quantile_samples: 0, ..CalibrationConfig::standard(3, 2) };
    assert!(matches!(calibration_error(&truth, &model, &config), Err(CalibrationError::InvalidConfig(_))));
}

#[test]
fn resampled_and_direct_predictive_agree() {
    let model = LinearModel::one_dimensional();
    let base: RegressionContext = [(0.5, 0.3), (1.5, 1.0)].into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5000;
    let resampled: Vec<f64> = (0..n)
        .map(|_| resampled_response(&-0.5, &base, &model, 30, &mut rng).unwrap())
        .collect();
    let direct = model.sample_responses(&-0.5, &base, n, &mut rng).unwrap();
    let d = ks_statistic(&resampled, &direct);
    assert!(d < ks_critical_01(n, n), "KS statistic {d}");
}
