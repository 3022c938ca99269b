use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{check_epsilon, ConjugateError};
use crate::cgm::{Cgm, CgmError};
use crate::data::{ContextDataset, ExamplePair};
use crate::scalar::Scalar;

/// Categorical responses with a Dirichlet prior on the label distribution.
///
/// There is no query: examples are `((), label index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletCategoricalModel<T> {
    labels: Vec<String>,
    alpha: Vec<T>,
}

impl<T: Scalar> DirichletCategoricalModel<T> {
    /// Symmetric prior with concentration `alpha` on every label.
    pub fn new(labels: Vec<String>, alpha: T) -> Result<Self, ConjugateError> {
        let alpha = vec![alpha; labels.len()];
        Self::with_concentrations(labels, alpha)
    }

    pub fn with_concentrations(labels: Vec<String>, alpha: Vec<T>) -> Result<Self, ConjugateError> {
        if labels.len() < 2 {
            return Err(ConjugateError::InvalidModel("need at least two labels".into()));
        }
        if alpha.len() != labels.len() {
            return Err(ConjugateError::DimensionMismatch {
                expected: labels.len(),
                got: alpha.len(),
            });
        }
        if alpha.iter().any(|&a| !(a > T::zero() && a.is_finite())) {
            return Err(ConjugateError::InvalidModel("concentrations must be positive".into()));
        }
        Ok(Self { labels, alpha })
    }

    /// Labels `"0"`, `"1"`, … with a symmetric unit prior.
    pub fn uniform(num_labels: usize) -> Result<Self, ConjugateError> {
        Self::new((0..num_labels).map(|i| i.to_string()).collect(), T::one())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn concentrations(&self) -> &[T] {
        &self.alpha
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn counts(&self, data: &ContextDataset<(), usize>) -> Result<Vec<usize>, ConjugateError> {
        let mut counts = vec![0usize; self.num_labels()];
        for (index, &label) in data.responses().enumerate() {
            *counts
                .get_mut(label)
                .ok_or(ConjugateError::UnknownLabel { index, label })? += 1;
        }
        Ok(counts)
    }

    /// Posterior concentrations `α + counts`.
    pub fn posterior_concentrations(
        &self,
        data: &ContextDataset<(), usize>,
    ) -> Result<Vec<T>, ConjugateError> {
        let counts = self.counts(data)?;
        Ok(self
            .alpha
            .iter()
            .zip(counts)
            .map(|(&a, c)| a + T::from_count(c))
            .collect())
    }

    /// `(count_c + α_c) / (n + Σα)`.
    pub fn categorical_predictive(
        &self,
        data: &ContextDataset<(), usize>,
    ) -> Result<Vec<T>, ConjugateError> {
        let post = self.posterior_concentrations(data)?;
        let total: T = post.iter().copied().sum();
        Ok(post.into_iter().map(|a| a / total).collect())
    }

    pub fn sample_mechanism<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        sample_dirichlet(&self.alpha, rng)
    }

    pub fn sample_label_given<R: Rng + ?Sized>(&self, mechanism: &[T], rng: &mut R) -> usize {
        sample_index(mechanism, rng)
    }

    /// `count` i.i.d. labels from a known label distribution.
    pub fn generate_context<R: Rng + ?Sized>(
        &self,
        mechanism: &[T],
        count: usize,
        rng: &mut R,
    ) -> ContextDataset<(), usize> {
        (0..count)
            .map(|_| ExamplePair::new((), sample_index(mechanism, rng)))
            .collect()
    }

    /// Posterior hallucination rate with the inner sum over labels done
    /// exactly and the outer integral over `f ~ Dir(α + counts)` by Monte
    /// Carlo.
    pub fn categorical_phr_bruteforce<R: Rng + ?Sized>(
        &self,
        data: &ContextDataset<(), usize>,
        epsilon: f64,
        num_posterior_samples: usize,
        rng: &mut R,
    ) -> Result<T, ConjugateError> {
        check_epsilon(epsilon)?;
        if num_posterior_samples == 0 {
            return Err(ConjugateError::NoSamples);
        }
        let post = self.posterior_concentrations(data)?;
        let predictive = self.categorical_predictive(data)?;
        let mut acc = T::zero();
        for _ in 0..num_posterior_samples {
            let f = sample_dirichlet(&post, rng);
            acc = acc + hallucination_mass(&f, &predictive, epsilon);
        }
        Ok(acc / T::from_count(num_posterior_samples))
    }

    /// Exact true hallucination rate for a known label distribution.
    pub fn analytic_thr(
        &self,
        data: &ContextDataset<(), usize>,
        mechanism: &[T],
        epsilon: f64,
    ) -> Result<T, ConjugateError> {
        check_epsilon(epsilon)?;
        if mechanism.len() != self.num_labels() {
            return Err(ConjugateError::DimensionMismatch {
                expected: self.num_labels(),
                got: mechanism.len(),
            });
        }
        let predictive = self.categorical_predictive(data)?;
        Ok(hallucination_mass(mechanism, &predictive, epsilon))
    }
}

/// Lower ε-quantile of `S = log f_Y` for `Y ~ f`: the smallest `s` with
/// `P(S ≤ s) ≥ ε`.
pub fn exact_log_prob_quantile<T: Scalar>(mechanism: &[T], epsilon: f64) -> T {
    let mut order: Vec<usize> = (0..mechanism.len()).collect();
    order.sort_by(|&a, &b| mechanism[a].partial_cmp(&mechanism[b]).expect("finite probabilities"));
    let eps = T::lit(epsilon);
    let slack = T::lit(1e-12);
    let mut cum = T::zero();
    for (pos, &c) in order.iter().enumerate() {
        cum = cum + mechanism[c];
        let tied_with_next = order
            .get(pos + 1)
            .is_some_and(|&n| mechanism[n] == mechanism[c]);
        if !tied_with_next && cum + slack >= eps {
            return mechanism[c].ln();
        }
    }
    order
        .last()
        .map(|&c| mechanism[c].ln())
        .unwrap_or_else(T::neg_infinity)
}

/// Predictive mass on labels outside the (1 − ε)-likely set of `mechanism`,
/// where the likely set is `{c : log f_c ≥ Q_ε(f)}`.
pub fn hallucination_mass<T: Scalar>(mechanism: &[T], predictive: &[T], epsilon: f64) -> T {
    let threshold = exact_log_prob_quantile(mechanism, epsilon);
    mechanism
        .iter()
        .zip(predictive)
        .filter(|(&f, _)| f.ln() < threshold)
        .fold(T::zero(), |acc, (_, &p)| acc + p)
}

fn sample_dirichlet<T: Scalar, R: Rng + ?Sized>(alpha: &[T], rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|a| {
            Gamma::new(a.to_f64_lossy(), 1.0)
                .expect("positive concentration")
                .sample(rng)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|g| T::lit(g / total)).collect()
}

fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::standard_uniform(rng);
    let mut cum = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        cum = cum + p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

impl<T: Scalar> Cgm for DirichletCategoricalModel<T> {
    type Query = ();
    type Response = usize;
    type Scalar = T;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &ContextDataset<(), usize>,
        rng: &mut R,
    ) -> Result<ExamplePair<(), usize>, CgmError> {
        let y = self.sample_response(&(), context, rng)?;
        Ok(ExamplePair::new((), y))
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        _query: &(),
        context: &ContextDataset<(), usize>,
        rng: &mut R,
    ) -> Result<usize, CgmError> {
        let p = self.categorical_predictive(context)?;
        Ok(sample_index(&p, rng))
    }

    fn log_prob(&self, response: &usize, _query: &(), context: &ContextDataset<(), usize>) -> Result<T, CgmError> {
        let p = self.categorical_predictive(context)?;
        let pc = p.get(*response).ok_or_else(|| {
            CgmError::Model(format!("label index {response} outside label set"))
        })?;
        Ok(pc.ln())
    }

    fn sample_responses<R: Rng + ?Sized>(
        &self,
        _query: &(),
        context: &ContextDataset<(), usize>,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, CgmError> {
        let p = self.categorical_predictive(context)?;
        Ok((0..count).map(|_| sample_index(&p, rng)).collect())
    }

    fn log_probs(
        &self,
        responses: &[usize],
        _query: &(),
        context: &ContextDataset<(), usize>,
    ) -> Result<Vec<T>, CgmError> {
        let logp: Vec<T> = self
            .categorical_predictive(context)?
            .into_iter()
            .map(|p| p.ln())
            .collect();
        responses
            .iter()
            .map(|&y| {
                logp.get(y)
                    .copied()
                    .ok_or_else(|| CgmError::Model(format!("label index {y} outside label set")))
            })
            .collect()
    }
}
