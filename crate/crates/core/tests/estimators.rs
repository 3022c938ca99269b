mod common;

use common::*;
use phr_core::cgm::{Cgm, CgmError};
use phr_core::conjugate::normal::{gaussian_entropy, two_sided_z};
use phr_core::estimators::*;
use phr_core::{ContextDataset, ExamplePair, LinearModel, RegressionContext, StreamKey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn one_d() -> LinearModel {
    LinearModel::one_dimensional()
}

fn single_point_context() -> RegressionContext {
    [(0.5, 0.3)].into_iter().collect()
}

#[test]
fn thr_of_point_mass_is_zero() {
    let cgm = PointMass::new("Sports");
    let ctx = ContextDataset::new();
    let rate = estimate_thr(&"q".to_string(), &ctx, &ctx, &cgm, 100, 0.05, &mut rng(1)).unwrap();
    assert_eq!(rate, 0.0);
}

#[test]
fn self_rate_of_conjugate_predictive() {
    let model = one_d();
    let ctx = single_point_context();
    let k = 2000;
    let rate = estimate_thr(&1.0, &ctx, &ctx, &model, k, 0.05, &mut rng(2)).unwrap();
    let tol = 3.0 * binomial_se(0.05, k);
    assert!((rate - 0.05).abs() <= tol, "rate {rate}");
}

#[test]
fn thr_matches_bruteforce_oracle() {
    let model = one_d();
    let mut r = rng(3);
    let f = [0.0, 1.0];
    let base = RegressionContext::new();
    let extended = model.generate_context(&f, 30, &mut r);
    let x = 1.0;

    // Oracle: fresh predictive draws under D_n against the exact ε-likely
    // interval of the predictive under D.
    let (m_n, v_n) = model.predictive_params(&base, x).unwrap();
    let (m_d, v_d) = model.predictive_params(&extended, x).unwrap();
    let half = two_sided_z(0.05) * v_d.sqrt();
    let n_oracle = 1_000_000;
    let mut r2 = rng(4);
    let outside = (0..n_oracle)
        .filter(|_| {
            let y: f64 = m_n + v_n.sqrt() * r2.sample::<f64, _>(rand_distr::StandardNormal);
            (y - m_d).abs() > half
        })
        .count();
    let oracle = outside as f64 / n_oracle as f64;
    let oracle_se = binomial_se(oracle, n_oracle);

    let runs: Vec<f64> = (0..20)
        .map(|s| estimate_thr(&x, &base, &extended, &model, 2000, 0.05, &mut rng(100 + s)).unwrap())
        .collect();
    let (est, est_se) = mean_and_se(&runs);
    let combined = (oracle_se.powi(2) + est_se.powi(2)).sqrt();
    assert!(
        (est - oracle).abs() <= 2.0 * combined,
        "estimate {est} ± {est_se}, oracle {oracle} ± {oracle_se}"
    );
}

#[test]
fn imagined_context_extends_in_order() {
    let model = one_d();
    let base = single_point_context();
    let same = sample_imagined_context(&base, &model, 0, &mut rng(5)).unwrap();
    assert_eq!(same, base);
    let ext = sample_imagined_context(&base, &model, 7, &mut rng(5)).unwrap();
    assert_eq!(ext.len(), 8);
    assert_eq!(ext.pairs()[0], base.pairs()[0]);
}

#[test]
fn first_imagined_label_is_uniform() {
    let model = phr_core::CategoricalModel::uniform(4).unwrap();
    let n = 10_000;
    let mut r = rng(6);
    let hits = (0..n)
        .filter(|_| {
            let ctx = sample_imagined_context(&ContextDataset::new(), &model, 1, &mut r).unwrap();
            ctx.pairs()[0].response == 2
        })
        .count();
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.25).abs() <= 3.0 * binomial_se(0.25, n), "freq {freq}");
}

#[test]
fn resampled_marginal_matches_direct_predictive() {
    let model = one_d();
    let base = single_point_context();
    let x = 1.0;
    let n = 10_000;
    let mut r = rng(7);
    let resampled: Vec<f64> = (0..n)
        .map(|_| {
            let ext = sample_imagined_context(&base, &model, 30, &mut r).unwrap();
            model.sample_response(&x, &ext, &mut r).unwrap()
        })
        .collect();
    let direct = model.sample_responses(&x, &base, n, &mut r).unwrap();
    let d = ks_statistic(&resampled, &direct);
    assert!(d < ks_critical_01(n, n), "KS statistic {d}");
}

#[test]
fn degenerate_prior_phr_is_epsilon() {
    let model = one_d().with_prior_scale(0.0).unwrap();
    let config = EstimatorConfig::regression().with_seed(8);
    let est = estimate_phr(&1.0, &single_point_context(), &model, &config).unwrap();
    assert!(
        (est.value - 0.05).abs() <= 3.0 * est.std_error,
        "{} ± {}",
        est.value,
        est.std_error
    );
}

#[test]
fn phr_matches_analytic_oracle() {
    let model = one_d();
    let ctx = single_point_context();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 64,
        num_samples: 1000,
        extend_by: 30,
        seed: 9,
    };
    let est = estimate_phr(&1.0, &ctx, &model, &config).unwrap();
    let n_oracle = 1_000_000;
    let oracle = model.analytic_phr(&ctx, 1.0, 0.05, n_oracle, &mut rng(10)).unwrap();
    let combined = (est.std_error.powi(2) + binomial_se(oracle, n_oracle).powi(2)).sqrt();
    assert!(
        (est.value - oracle).abs() <= 2.0 * combined,
        "estimate {} ± {}, oracle {oracle}",
        est.value,
        est.std_error
    );
}

#[test]
fn phr_decreases_with_context_length() {
    let model = one_d();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 20,
        num_samples: 400,
        extend_by: 30,
        seed: 11,
    };
    let mut r = rng(12);
    let (mut at1, mut at8) = (0.0, 0.0);
    for task in 0..50u64 {
        let f = model.sample_mechanism(&mut r);
        let data = model.generate_context(&f, 8, &mut r);
        let x = model.sample_query(&mut r);
        let c = config.with_seed(task);
        at1 += estimate_phr(&x, &data.prefix(1), &model, &c).unwrap().value;
        at8 += estimate_phr(&x, &data, &model, &c).unwrap().value;
    }
    assert!(at8 < at1, "mean PHR n=8 {} vs n=1 {}", at8 / 50.0, at1 / 50.0);
}

#[test]
fn phr_is_independent_of_worker_count() {
    let model = one_d();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 16,
        num_samples: 200,
        extend_by: 10,
        seed: 13,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_phr(&0.4, &single_point_context(), &model, &config).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
    let other = estimate_phr(&0.4, &single_point_context(), &model, &config.with_seed(14)).unwrap();
    assert_ne!(one.per_replicate, other.per_replicate);
}

#[test]
fn mhr_with_empty_eval_is_self_rate() {
    let model = one_d();
    let k = 4000;
    let rate = estimate_mhr(&1.0, &single_point_context(), &ContextDataset::new(), &model, k, 0.05, &mut rng(15)).unwrap();
    assert!((rate - 0.05).abs() <= 3.0 * binomial_se(0.05, k) * 2f64.sqrt(), "{rate}");
    let pm = PointMass::new("a");
    let none = ContextDataset::new();
    assert_eq!(estimate_mhr(&"q".into(), &none, &none, &pm, 50, 0.05, &mut rng(0)).unwrap(), 0.0);
}

#[test]
fn mhr_far_from_prior_is_near_one() {
    let model = one_d();
    let mut r = rng(16);
    let eval = model.generate_context(&[5.0, 5.0], 30, &mut r);
    let base = RegressionContext::new();
    let x = 1.0;

    let (m_n, v_n) = model.predictive_params(&base, x).unwrap();
    let (m_d, v_d) = model.predictive_params(&eval, x).unwrap();
    let half = two_sided_z(0.05) * v_d.sqrt();
    let n_oracle = 1_000_000;
    let outside = (0..n_oracle)
        .filter(|_| {
            let y: f64 = m_n + v_n.sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal);
            (y - m_d).abs() > half
        })
        .count();
    let oracle = outside as f64 / n_oracle as f64;

    let runs: Vec<f64> = (0..20)
        .map(|s| estimate_mhr(&x, &base, &eval, &model, 2000, 0.05, &mut rng(200 + s)).unwrap())
        .collect();
    let (est, est_se) = mean_and_se(&runs);
    let combined = (binomial_se(oracle, n_oracle).powi(2) + est_se.powi(2)).sqrt();
    assert!(est > 0.9, "{est}");
    assert!((est - oracle).abs() <= 2.0 * combined, "estimate {est} ± {est_se}, oracle {oracle}");
}

#[test]
fn error_rates_of_stub_models() {
    let q = "q".to_string();
    let none = ContextDataset::new();
    let right = PointMass::new("yes");
    assert_eq!(estimate_error_rate(&q, &"yes".into(), &none, &right, 100, &mut rng(0)).unwrap(), 0.0);
    assert_eq!(estimate_error_rate(&q, &"no".into(), &none, &right, 100, &mut rng(0)).unwrap(), 1.0);
    let uniform = UniformLabels::new(4);
    let k = 10_000;
    let rate = estimate_error_rate(&q, &"L0".into(), &none, &uniform, k, &mut rng(17)).unwrap();
    assert!((rate - 0.75).abs() <= 3.0 * binomial_se(0.75, k), "{rate}");
}

#[test]
fn predictive_entropy_of_stubs() {
    let q = "q".to_string();
    let none = ContextDataset::new();
    let pm = estimate_predictive_entropy(&q, &none, &PointMass::new("a"), 100, &mut rng(0)).unwrap();
    assert_eq!(pm.value, 0.0);
    let u = estimate_predictive_entropy(&q, &none, &UniformLabels::new(4), 10_000, &mut rng(18)).unwrap();
    assert!((u.value - 4f64.ln()).abs() <= 3.0 * u.std_error + 1e-12);
}

#[test]
fn predictive_entropy_of_gaussian_predictive() {
    let model = one_d();
    let ctx = single_point_context();
    let x = 0.7;
    let (_, v) = model.predictive_params(&ctx, x).unwrap();
    let h = estimate_predictive_entropy(&x, &ctx, &model, 20_000, &mut rng(19)).unwrap();
    let truth = gaussian_entropy(v);
    assert!((h.value - truth).abs() <= 3.0 * h.std_error, "{} vs {truth}", h.value);
}

#[test]
fn aleatoric_without_extension_matches_predictive() {
    let model = one_d();
    let ctx = single_point_context();
    let x = 0.3;
    let mut diffs = Vec::new();
    for seed in 0..30 {
        let config = EstimatorConfig {
            epsilon: 0.05,
            num_contexts: 1,
            num_samples: 500,
            extend_by: 0,
            seed,
        };
        let alea = estimate_aleatoric_entropy(&x, &ctx, &model, &config).unwrap();
        let pred = estimate_predictive_entropy(&x, &ctx, &model, 500, &mut config.predictive_rng()).unwrap();
        diffs.push(alea.value - pred.value);
    }
    let (m, se) = mean_and_se(&diffs);
    assert!(m.abs() <= 3.0 * se, "mean diff {m} ± {se}");
    let pm = estimate_aleatoric_entropy(&"q".into(), &ContextDataset::new(), &PointMass::new("a"), &EstimatorConfig::language()).unwrap();
    assert_eq!(pm.value, 0.0);
}

#[test]
fn aleatoric_approaches_noise_entropy_from_above() {
    let model = one_d();
    let ctx = single_point_context();
    let x = 1.0;
    let floor = gaussian_entropy(0.01);
    let gap = |extend_by: usize| {
        let config = EstimatorConfig {
            epsilon: 0.05,
            num_contexts: 40,
            num_samples: 2000,
            extend_by,
            seed: 20,
        };
        let a = estimate_aleatoric_entropy(&x, &ctx, &model, &config).unwrap();
        (a.value - floor, a.std_error)
    };
    let (g5, s5) = gap(5);
    let (g50, s50) = gap(50);
    let (g200, s200) = gap(200);
    assert!(g5 > 3.0 * s5, "gap {g5}");
    assert!(g50 < g5 && g200 < g50, "{g5} {g50} {g200}");
    assert!(g200 > -3.0 * s200 && g200 < 0.02, "{g200} ± {s200}");
    let _ = s50;
}

#[test]
fn mutual_information_identity() {
    let model = one_d();
    let ctx = single_point_context();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 8,
        num_samples: 300,
        extend_by: 20,
        seed: 21,
    };
    let mi = estimate_mutual_information(&0.5, &ctx, &model, &config).unwrap();
    let pred = estimate_predictive_entropy(&0.5, &ctx, &model, 300, &mut config.predictive_rng()).unwrap();
    let alea = estimate_aleatoric_entropy(&0.5, &ctx, &model, &config).unwrap();
    assert_eq!(mi.predictive, pred);
    assert_eq!(mi.aleatoric, alea);
    assert_eq!(mi.value, pred.value - alea.value);
}

#[test]
fn mutual_information_without_epistemic_uncertainty() {
    let model = one_d().with_prior_scale(0.0).unwrap();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 40,
        num_samples: 2000,
        extend_by: 10,
        seed: 22,
    };
    let mi = estimate_mutual_information(&1.0, &single_point_context(), &model, &config).unwrap();
    assert!(mi.value.abs() <= 3.0 * mi.std_error, "{} ± {}", mi.value, mi.std_error);
}

#[test]
fn mutual_information_matches_gaussian_closed_form() {
    let model = one_d();
    let ctx = RegressionContext::new();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 100,
        num_samples: 2000,
        extend_by: 1000,
        seed: 23,
    };
    let mi = estimate_mutual_information(&0.0, &ctx, &model, &config).unwrap();
    let truth = 0.5 * 101f64.ln();
    assert!((mi.value - truth).abs() <= 2.0 * mi.std_error, "{} ± {} vs {truth}", mi.value, mi.std_error);
}

/// `H(predictive) - E_{p ~ Beta(a, b)}[H(Bernoulli(p))]` by Simpson's rule.
fn beta_bernoulli_mi(a: f64, b: f64) -> f64 {
    let ln_beta = statrs::function::beta::ln_beta(a, b);
    let h = |p: f64| {
        let t = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
        t(p) + t(1.0 - p)
    };
    let density = |p: f64| {
        if p <= 0.0 || p >= 1.0 {
            return if (p <= 0.0 && a == 1.0) || (p >= 1.0 && b == 1.0) { (-ln_beta).exp() } else { 0.0 };
        }
        ((a - 1.0) * p.ln() + (b - 1.0) * (1.0 - p).ln() - ln_beta).exp()
    };
    let n = 20_000;
    let step = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let p = i as f64 * step;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * h(p) * density(p);
    }
    let expected_h = acc * step / 3.0;
    let m = a / (a + b);
    h(m) - expected_h
}

#[test]
fn mutual_information_matches_beta_bernoulli_enumeration() {
    let model = phr_core::CategoricalModel::uniform(2).unwrap();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 400,
        num_samples: 2000,
        extend_by: 1000,
        seed: 24,
    };
    for labels in [vec![], vec![0usize, 0, 0, 1]] {
        let ctx: ContextDataset<(), usize> = labels.iter().map(|&l| ((), l)).collect();
        let ones = labels.iter().filter(|&&l| l == 0).count() as f64;
        let truth = beta_bernoulli_mi(1.0 + ones, 1.0 + labels.len() as f64 - ones);
        let mi = estimate_mutual_information(&(), &ctx, &model, &config).unwrap();
        assert!(
            (mi.value - truth).abs() <= 2.0 * mi.std_error + 1e-12,
            "n = {}: {} ± {} vs {truth}",
            labels.len(),
            mi.value,
            mi.std_error
        );
    }
}

/// Fails on the third pair it is asked to sample.
struct FlakyPairs {
    inner: LinearModel,
}

impl Cgm for FlakyPairs {
    type Query = f64;
    type Response = f64;
    type Scalar = f64;

    fn sample_pair<R: Rng + ?Sized>(&self, context: &RegressionContext, rng: &mut R) -> Result<ExamplePair<f64, f64>, CgmError> {
        if context.len() == 3 {
            return Err(CgmError::Model("boom".into()));
        }
        self.inner.sample_pair(context, rng)
    }

    fn sample_response<R: Rng + ?Sized>(&self, query: &f64, context: &RegressionContext, rng: &mut R) -> Result<f64, CgmError> {
        self.inner.sample_response(query, context, rng)
    }

    fn log_prob(&self, response: &f64, query: &f64, context: &RegressionContext) -> Result<f64, CgmError> {
        self.inner.log_prob(response, query, context)
    }
}

#[test]
fn failures_carry_replicate_and_index() {
    let cgm = FlakyPairs { inner: one_d() };
    let config = EstimatorConfig::language().with_seed(1);
    let err = estimate_phr(&1.0, &single_point_context(), &cgm, &config).unwrap_err();
    match err {
        EstimateError::Replicate { replicate: 0, source } => {
            assert!(matches!(*source, EstimateError::Imagine { index: 4, .. }), "{source:?}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let msg = estimate_phr(&1.0, &single_point_context(), &cgm, &config).unwrap_err().to_string();
    assert!(msg.contains("replicate 0") && msg.contains("imagined example 4"), "{msg}");
}

#[test]
fn single_precision_pipeline() {
    let model = phr_core::LinearModelF32::one_dimensional().with_prior_scale(0.0).unwrap();
    let config = EstimatorConfig {
        epsilon: 0.05,
        num_contexts: 20,
        num_samples: 2000,
        extend_by: 5,
        seed: 25,
    };
    let ctx: ContextDataset<f32, f32> = ContextDataset::new();
    let est = estimate_phr(&1.0f32, &ctx, &model, &config).unwrap();
    assert!((est.value - 0.05).abs() <= 3.0 * est.std_error + 1e-6);
}

/// Shifts every log-probability of the wrapped model by a constant.
struct Shifted<C> {
    inner: C,
    shift: f64,
}

impl<C: Cgm<Scalar = f64>> Cgm for Shifted<C> {
    type Query = C::Query;
    type Response = C::Response;
    type Scalar = f64;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &phr_core::cgm::Context<Self>,
        rng: &mut R,
    ) -> Result<phr_core::cgm::Pair<Self>, CgmError> {
        self.inner.sample_pair(context, rng)
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        query: &Self::Query,
        context: &phr_core::cgm::Context<Self>,
        rng: &mut R,
    ) -> Result<Self::Response, CgmError> {
        self.inner.sample_response(query, context, rng)
    }

    fn log_prob(
        &self,
        response: &Self::Response,
        query: &Self::Query,
        context: &phr_core::cgm::Context<Self>,
    ) -> Result<f64, CgmError> {
        Ok(self.inner.log_prob(response, query, context)? + self.shift)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rates_are_grid_valued_means(seed in any::<u64>(), k in 1usize..60, m in 1usize..6, eps in 0.01f64..0.99) {
        let model = one_d();
        let config = EstimatorConfig { epsilon: eps, num_contexts: m, num_samples: k, extend_by: 3, seed };
        let est = estimate_phr(&0.2, &single_point_context(), &model, &config).unwrap();
        let mut sum = 0.0;
        for &v in &est.per_replicate {
            prop_assert!((0.0..=1.0).contains(&v));
            let scaled = v * k as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            sum += v;
        }
        prop_assert_eq!(est.value, sum / m as f64);
        prop_assert!(est.std_error >= 0.0);
    }

    #[test]
    fn rates_are_invariant_to_log_prob_shift(seed in any::<u64>(), shift in -50.0f64..50.0) {
        // Quantise so the shift is exact in floating point.
        let shift = (shift * 8.0).round() / 8.0;
        let model = phr_core::CategoricalModel::uniform(3).unwrap();
        let config = EstimatorConfig { epsilon: 0.3, num_contexts: 4, num_samples: 50, extend_by: 6, seed };
        let ctx: ContextDataset<(), usize> = [((), 0usize), ((), 0), ((), 2)].into_iter().collect();
        let plain = estimate_phr(&(), &ctx, &model, &config).unwrap();
        let shifted = estimate_phr(&(), &ctx, &Shifted { inner: model.clone(), shift }, &config).unwrap();
        prop_assert_eq!(plain, shifted);
    }

    #[test]
    fn identical_seeds_are_bit_identical(seed in any::<u64>()) {
        let model = one_d();
        let config = EstimatorConfig { epsilon: 0.1, num_contexts: 3, num_samples: 40, extend_by: 4, seed };
        let a = estimate_mutual_information(&0.1, &single_point_context(), &model, &config).unwrap();
        let b = estimate_mutual_information(&0.1, &single_point_context(), &model, &config).unwrap();
        prop_assert_eq!(a, b);
        let _ = StreamKey::new(seed);
    }
}
