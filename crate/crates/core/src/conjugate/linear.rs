use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, is_symmetric, lower_mul, mat_vec, psd_cholesky};
use super::normal::{gaussian_log_pdf, standard_normal_cdf, two_sided_z};
use super::{check_epsilon, ConjugateError};
use crate::calibration::{CalibrationTask, TruthGenerator};
use crate::cgm::{Cgm, CgmError};
use crate::data::{ContextDataset, ExamplePair};
use crate::scalar::Scalar;

/// Distribution of queries used when the model samples a fresh pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryDistribution {
    /// `x ~ N(0, query_std²)`.
    #[default]
    Normal,
    /// `x ~ U[low, high]`.
    Uniform { low: f64, high: f64 },
}

impl QueryDistribution {
    pub fn uniform_pm2() -> Self {
        QueryDistribution::Uniform {
            low: -2.0,
            high: 2.0,
        }
    }
}

/// Bayesian linear regression on the polynomial basis `(1, x, …, x^d)`:
/// `f ~ N(μ₀, Σ₀)`, `y | f, x ~ N(fᵀφ(x), σ_y²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateLinearModel<T> {
    degree: usize,
    prior_mean: Vec<T>,
    prior_cov: Vec<T>,
    noise_std: T,
    query_std: T,
    query_distribution: QueryDistribution,
}

/// Gaussian posterior over the coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams<T> {
    pub mean: Vec<T>,
    /// Row-major `dim × dim`.
    pub cov: Vec<T>,
}

/// Symmetric (1 − ε)-likely interval of `N(fᵀφ(x), σ_y²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelyInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> LikelyInterval<T> {
    pub fn contains(&self, y: T) -> bool {
        y >= self.lower && y <= self.upper
    }

    pub fn half_width(&self) -> T {
        (self.upper - self.lower) / T::lit(2.0)
    }
}

impl<T: Scalar> PosteriorParams<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_entry(&self, i: usize, j: usize) -> T {
        self.cov[i * self.dim() + j]
    }

    /// `φᵀΣφ`.
    pub fn variance_along(&self, phi: &[T]) -> T {
        dot(phi, &mat_vec(&self.cov, phi))
    }

    pub fn mean_along(&self, phi: &[T]) -> T {
        dot(phi, &self.mean)
    }

    /// Lower Cholesky factor of the covariance (zero columns where singular).
    pub fn cholesky(&self) -> Result<Vec<T>, ConjugateError> {
        psd_cholesky(&self.cov, self.dim()).ok_or_else(|| {
            ConjugateError::InvalidModel("posterior covariance is not positive semi-definite".into())
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>, ConjugateError> {
        let l = self.cholesky()?;
        Ok(self.sample_with_factor(&l, rng))
    }

    fn sample_with_factor<R: Rng + ?Sized>(&self, l: &[T], rng: &mut R) -> Vec<T> {
        let xi: Vec<T> = (0..self.dim()).map(|_| T::standard_normal(rng)).collect();
        lower_mul(l, &xi)
            .into_iter()
            .zip(&self.mean)
            .map(|(d, &m)| m + d)
            .collect()
    }
}

impl<T: Scalar> ConjugateLinearModel<T> {
    /// Standard normal prior `N(0, I)` over `degree + 1` coefficients.
    pub fn new(degree: usize, noise_std: T, query_std: T) -> Result<Self, ConjugateError> {
        let dim = degree + 1;
        let mut cov = vec![T::zero(); dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = T::one();
        }
        Self::with_prior(degree, vec![T::zero(); dim], cov, noise_std, query_std)
    }

    pub fn with_prior(
        degree: usize,
        prior_mean: Vec<T>,
        prior_cov: Vec<T>,
        noise_std: T,
        query_std: T,
    ) -> Result<Self, ConjugateError> {
        if degree == 0 {
            return Err(ConjugateError::InvalidModel("degree must be at least 1".into()));
        }
        let dim = degree + 1;
        if prior_mean.len() != dim {
            return Err(ConjugateError::DimensionMismatch {
                expected: dim,
                got: prior_mean.len(),
            });
        }
        if prior_cov.len() != dim * dim {
            return Err(ConjugateError::DimensionMismatch {
                expected: dim * dim,
                got: prior_cov.len(),
            });
        }
        if !(noise_std > T::zero() && noise_std.is_finite()) {
            return Err(ConjugateError::InvalidModel("noise_std must be positive".into()));
        }
        if !(query_std > T::zero() && query_std.is_finite()) {
            return Err(ConjugateError::InvalidModel("query_std must be positive".into()));
        }
        if prior_mean.iter().chain(&prior_cov).any(|v| !v.is_finite()) {
            return Err(ConjugateError::InvalidModel("non-finite prior".into()));
        }
        if !is_symmetric(&prior_cov, dim) || psd_cholesky(&prior_cov, dim).is_none() {
            return Err(ConjugateError::InvalidModel(
                "prior covariance must be symmetric positive semi-definite".into(),
            ));
        }
        Ok(Self {
            degree,
            prior_mean,
            prior_cov,
            noise_std,
            query_std,
            query_distribution: QueryDistribution::Normal,
        })
    }

    /// One-dimensional regression with intercept: `σ_x = 1`, `σ_y = 0.1`.
    pub fn one_dimensional() -> Self {
        Self::new(1, T::lit(0.1), T::one()).expect("valid preset")
    }

    /// Cubic polynomial regression with the same noise levels.
    pub fn cubic() -> Self {
        Self::new(3, T::lit(0.1), T::one()).expect("valid preset")
    }

    /// Rescales the prior covariance to `scale · I`. A zero scale makes the
    /// mechanism a point mass at the prior mean.
    pub fn with_prior_scale(mut self, scale: T) -> Result<Self, ConjugateError> {
        if !(scale >= T::zero() && scale.is_finite()) {
            return Err(ConjugateError::InvalidModel("prior scale must be >= 0".into()));
        }
        let dim = self.dim();
        self.prior_cov = vec![T::zero(); dim * dim];
        for i in 0..dim {
            self.prior_cov[i * dim + i] = scale;
        }
        Ok(self)
    }

    pub fn with_prior_mean(mut self, mean: Vec<T>) -> Result<Self, ConjugateError> {
        if mean.len() != self.dim() {
            return Err(ConjugateError::DimensionMismatch {
                expected: self.dim(),
                got: mean.len(),
            });
        }
        self.prior_mean = mean;
        Ok(self)
    }

    pub fn with_query_distribution(mut self, dist: QueryDistribution) -> Self {
        self.query_distribution = dist;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn noise_std(&self) -> T {
        self.noise_std
    }

    pub fn query_std(&self) -> T {
        self.query_std
    }

    pub fn query_distribution(&self) -> QueryDistribution {
        self.query_distribution
    }

    pub fn prior(&self) -> PosteriorParams<T> {
        PosteriorParams {
            mean: self.prior_mean.clone(),
            cov: self.prior_cov.clone(),
        }
    }

    /// `φ(x) = (1, x, …, x^d)`.
    pub fn features(&self, x: T) -> Vec<T> {
        let mut phi = Vec::with_capacity(self.dim());
        let mut p = T::one();
        for _ in 0..self.dim() {
            phi.push(p);
            p = p * x;
        }
        phi
    }

    fn noise_var(&self) -> T {
        self.noise_std * self.noise_std
    }

    /// Exact posterior `p(f | data)`.
    ///
    /// Observations are absorbed one at a time in covariance form, so a
    /// singular prior (including the all-zero covariance) is handled without
    /// inverting anything; the only division is by `σ_y² + φᵀΣφ ≥ σ_y²`.
    pub fn posterior_params(
        &self,
        data: &ContextDataset<T, T>,
    ) -> Result<PosteriorParams<T>, ConjugateError> {
        let mut post = self.prior();
        for (index, pair) in data.iter().enumerate() {
            self.absorb(&mut post, pair.query, pair.response, index)?;
        }
        Ok(post)
    }

    /// One covariance-form rank-one update with the observation `(x, y)`.
    fn absorb(
        &self,
        post: &mut PosteriorParams<T>,
        x: T,
        y: T,
        index: usize,
    ) -> Result<(), ConjugateError> {
        let dim = self.dim();
        let noise = self.noise_var();
        let PosteriorParams { mean, cov } = post;
        if !x.is_finite() || !y.is_finite() {
            return Err(ConjugateError::NonFinite { index });
        }
        let phi = self.features(x);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(ConjugateError::NonFinite { index });
        }
        let s = mat_vec(cov, &phi);
        let denom = noise + dot(&phi, &s);
        if !(denom.is_finite() && denom >= noise) {
            return Err(ConjugateError::SingularUpdate { index });
        }
        let residual = y - dot(&phi, mean);
        for i in 0..dim {
            mean[i] = mean[i] + s[i] * residual / denom;
        }
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] = cov[i * dim + j] - s[i] * s[j] / denom;
            }
        }
        // Keep exact symmetry; rank-one downdates drift otherwise.
        for i in 0..dim {
            for j in 0..i {
                let avg = (cov[i * dim + j] + cov[j * dim + i]) / T::lit(2.0);
                cov[i * dim + j] = avg;
                cov[j * dim + i] = avg;
            }
            if cov[i * dim + i] < T::zero() {
                if cov[i * dim + i] < -T::lit(1e-9) * denom {
                    return Err(ConjugateError::SingularUpdate { index });
                }
                cov[i * dim + i] = T::zero();
            }
        }
        Ok(())
    }

    /// Mean and variance of the Gaussian predictive `p(y | x, data)`.
    pub fn predictive_params(
        &self,
        data: &ContextDataset<T, T>,
        query: T,
    ) -> Result<(T, T), ConjugateError> {
        let post = self.posterior_params(data)?;
        Ok(self.predictive_from(&post, query))
    }

    pub fn predictive_from(&self, posterior: &PosteriorParams<T>, query: T) -> (T, T) {
        let phi = self.features(query);
        let var = self.noise_var() + posterior.variance_along(&phi).max(T::zero());
        (posterior.mean_along(&phi), var)
    }

    /// `fᵀφ(x) ± z_{1−ε/2} σ_y`.
    pub fn likely_interval(
        &self,
        mechanism: &[T],
        query: T,
        epsilon: f64,
    ) -> Result<LikelyInterval<T>, ConjugateError> {
        check_epsilon(epsilon)?;
        if mechanism.len() != self.dim() {
            return Err(ConjugateError::DimensionMismatch {
                expected: self.dim(),
                got: mechanism.len(),
            });
        }
        let center = dot(mechanism, &self.features(query));
        let half = T::lit(two_sided_z(epsilon)) * self.noise_std;
        Ok(LikelyInterval {
            lower: center - half,
            upper: center + half,
        })
    }

    /// Posterior hallucination rate by direct Monte Carlo: `f` from the exact
    /// posterior, `y` independently from the exact predictive, counting
    /// `y ∉ likely_interval(f, x, ε)`.
    pub fn analytic_phr<R: Rng + ?Sized>(
        &self,
        data: &ContextDataset<T, T>,
        query: T,
        epsilon: f64,
        num_samples: usize,
        rng: &mut R,
    ) -> Result<T, ConjugateError> {
        check_epsilon(epsilon)?;
        if num_samples == 0 {
            return Err(ConjugateError::NoSamples);
        }
        let post = self.posterior_params(data)?;
        let l = post.cholesky()?;
        let phi = self.features(query);
        // fᵀφ = μᵀφ + ξᵀ(Lᵀφ) with ξ standard normal.
        let dim = self.dim();
        let loading: Vec<T> = (0..dim)
            .map(|k| (k..dim).fold(T::zero(), |acc, i| acc + l[i * dim + k] * phi[i]))
            .collect();
        let center_mean = post.mean_along(&phi);
        let (pred_mean, pred_var) = self.predictive_from(&post, query);
        let pred_std = pred_var.sqrt();
        let half = T::lit(two_sided_z(epsilon)) * self.noise_std;

        let mut outside = 0usize;
        for _ in 0..num_samples {
            let mut center = center_mean;
            for &w in &loading {
                center = center + w * T::standard_normal(rng);
            }
            let y = pred_mean + pred_std * T::standard_normal(rng);
            if (y - center).abs() > half {
                outside += 1;
            }
        }
        Ok(T::from_count(outside) / T::from_count(num_samples))
    }

    /// Closed-form true hallucination rate for a known mechanism: the
    /// predictive mass outside `likely_interval(mechanism, x, ε)`.
    pub fn analytic_thr(
        &self,
        data: &ContextDataset<T, T>,
        mechanism: &[T],
        query: T,
        epsilon: f64,
    ) -> Result<T, ConjugateError> {
        let interval = self.likely_interval(mechanism, query, epsilon)?;
        let (m, v) = self.predictive_params(data, query)?;
        let sd = v.sqrt().to_f64_lossy();
        let m = m.to_f64_lossy();
        let below = standard_normal_cdf((interval.lower.to_f64_lossy() - m) / sd);
        let above = standard_normal_cdf((m - interval.upper.to_f64_lossy()) / sd);
        Ok(T::lit(below + above))
    }

    /// `I(Y; F | x, data) = ½ ln(1 + φᵀΣφ / σ_y²)`.
    pub fn analytic_mi(&self, data: &ContextDataset<T, T>, query: T) -> Result<T, ConjugateError> {
        let post = self.posterior_params(data)?;
        let phi = self.features(query);
        let ratio = post.variance_along(&phi).max(T::zero()) / self.noise_var();
        Ok(ratio.ln_1p() / T::lit(2.0))
    }

    pub fn sample_mechanism<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.prior()
            .sample(rng)
            .expect("prior validated as positive semi-definite")
    }

    pub fn sample_query<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self.query_distribution {
            QueryDistribution::Normal => self.query_std * T::standard_normal(rng),
            QueryDistribution::Uniform { low, high } => {
                T::lit(low) + T::lit(high - low) * T::standard_uniform(rng)
            }
        }
    }

    /// `y ~ N(fᵀφ(x), σ_y²)`.
    pub fn sample_response_given<R: Rng + ?Sized>(&self, mechanism: &[T], query: T, rng: &mut R) -> T {
        dot(mechanism, &self.features(query)) + self.noise_std * T::standard_normal(rng)
    }

    /// `count` i.i.d. pairs from the true process with mechanism `f`.
    pub fn generate_context<R: Rng + ?Sized>(
        &self,
        mechanism: &[T],
        count: usize,
        rng: &mut R,
    ) -> ContextDataset<T, T> {
        (0..count)
            .map(|_| {
                let x = self.sample_query(rng);
                let y = self.sample_response_given(mechanism, x, rng);
                ExamplePair::new(x, y)
            })
            .collect()
    }
}

impl<T: Scalar> Cgm for ConjugateLinearModel<T> {
    type Query = T;
    type Response = T;
    type Scalar = T;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &ContextDataset<T, T>,
        rng: &mut R,
    ) -> Result<ExamplePair<T, T>, CgmError> {
        let x = self.sample_query(rng);
        let y = self.sample_response(&x, context, rng)?;
        Ok(ExamplePair::new(x, y))
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        query: &T,
        context: &ContextDataset<T, T>,
        rng: &mut R,
    ) -> Result<T, CgmError> {
        let (m, v) = self.predictive_params(context, *query)?;
        Ok(m + v.sqrt() * T::standard_normal(rng))
    }

    fn log_prob(&self, response: &T, query: &T, context: &ContextDataset<T, T>) -> Result<T, CgmError> {
        let (m, v) = self.predictive_params(context, *query)?;
        Ok(gaussian_log_pdf(*response, m, v))
    }

    fn extend_context<R: Rng + ?Sized>(
        &self,
        context: &mut ContextDataset<T, T>,
        count: usize,
        rng: &mut R,
    ) -> Result<(), CgmError> {
        let mut post = self.posterior_params(context)?;
        for _ in 0..count {
            let x = self.sample_query(rng);
            let (m, v) = self.predictive_from(&post, x);
            let y = m + v.sqrt() * T::standard_normal(rng);
            self.absorb(&mut post, x, y, context.len())?;
            context.push(ExamplePair::new(x, y));
        }
        Ok(())
    }

    fn sample_responses<R: Rng + ?Sized>(
        &self,
        query: &T,
        context: &ContextDataset<T, T>,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<T>, CgmError> {
        let (m, v) = self.predictive_params(context, *query)?;
        let sd = v.sqrt();
        Ok((0..count).map(|_| m + sd * T::standard_normal(rng)).collect())
    }

    fn log_probs(
        &self,
        responses: &[T],
        query: &T,
        context: &ContextDataset<T, T>,
    ) -> Result<Vec<T>, CgmError> {
        let (m, v) = self.predictive_params(context, *query)?;
        Ok(responses.iter().map(|&y| gaussian_log_pdf(y, m, v)).collect())
    }
}

/// Ground-truth task generator for calibration studies: each task draws a
/// fresh mechanism from the prior, a context from it, one query, and fresh
/// responses at that query.
#[derive(Debug, Clone)]
pub struct LinearTruth<T> {
    pub model: ConjugateLinearModel<T>,
}

impl<T: Scalar> TruthGenerator for LinearTruth<T> {
    type Query = T;
    type Response = T;

    fn generate<R: Rng + ?Sized>(
        &self,
        context_size: usize,
        num_fresh: usize,
        rng: &mut R,
    ) -> Result<CalibrationTask<T, T>, CgmError> {
        let f = self.model.sample_mechanism(rng);
        let context = self.model.generate_context(&f, context_size, rng);
        let query = self.model.sample_query(rng);
        let fresh_responses = (0..num_fresh)
            .map(|_| self.model.sample_response_given(&f, query, rng))
            .collect();
        Ok(CalibrationTask {
            context,
            query,
            fresh_responses,
        })
    }
}
