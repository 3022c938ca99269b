#![allow(dead_code)]

use phr_core::cgm::{Cgm, CgmError};
use phr_core::{ContextDataset, ExamplePair, Scalar};
use rand::Rng;

type TextCtx = ContextDataset<String, String>;

/// Always answers `label`.
pub struct PointMass {
    pub label: String,
}

impl PointMass {
    pub fn new(label: &str) -> Self {
        Self {
            label: label.to_string(),
        }
    }
}

impl Cgm for PointMass {
    type Query = String;
    type Response = String;
    type Scalar = f64;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        _context: &TextCtx,
        _rng: &mut R,
    ) -> Result<ExamplePair<String, String>, CgmError> {
        Ok(ExamplePair::new("q".to_string(), self.label.clone()))
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        _query: &String,
        _context: &TextCtx,
        _rng: &mut R,
    ) -> Result<String, CgmError> {
        Ok(self.label.clone())
    }

    fn log_prob(&self, response: &String, _query: &String, _context: &TextCtx) -> Result<f64, CgmError> {
        Ok(if *response == self.label {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }
}

/// Uniform over a fixed label set regardless of context.
pub struct UniformLabels {
    pub labels: Vec<String>,
}

impl UniformLabels {
    pub fn new(n: usize) -> Self {
        Self {
            labels: (0..n).map(|i| format!("L{i}")).collect(),
        }
    }
}

impl Cgm for UniformLabels {
    type Query = String;
    type Response = String;
    type Scalar = f64;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &TextCtx,
        rng: &mut R,
    ) -> Result<ExamplePair<String, String>, CgmError> {
        let y = self.sample_response(&String::new(), context, rng)?;
        Ok(ExamplePair::new("q".to_string(), y))
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        _query: &String,
        _context: &TextCtx,
        rng: &mut R,
    ) -> Result<String, CgmError> {
        Ok(self.labels[rng.random_range(0..self.labels.len())].clone())
    }

    fn log_prob(&self, response: &String, _query: &String, _context: &TextCtx) -> Result<f64, CgmError> {
        Ok(if self.labels.contains(response) {
            -(self.labels.len() as f64).ln()
        } else {
            f64::NEG_INFINITY
        })
    }
}

/// `y ~ N(mean, sd²)` independent of query and context; `x ~ N(0, 1)`.
pub struct FixedGaussian<T> {
    pub mean: T,
    pub sd: T,
}

impl<T: Scalar> Cgm for FixedGaussian<T> {
    type Query = T;
    type Response = T;
    type Scalar = T;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &ContextDataset<T, T>,
        rng: &mut R,
    ) -> Result<ExamplePair<T, T>, CgmError> {
        let x = T::standard_normal(rng);
        let y = self.sample_response(&x, context, rng)?;
        Ok(ExamplePair::new(x, y))
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        _query: &T,
        _context: &ContextDataset<T, T>,
        rng: &mut R,
    ) -> Result<T, CgmError> {
        Ok(self.mean + self.sd * T::standard_normal(rng))
    }

    fn log_prob(&self, response: &T, _query: &T, _context: &ContextDataset<T, T>) -> Result<T, CgmError> {
        let z = (*response - self.mean) / self.sd;
        let two = T::lit(2.0);
        Ok(-(T::TAU() * self.sd * self.sd).ln() / two - z * z / two)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 0.01.
pub fn ks_critical_01(n: usize, m: usize) -> f64 {
    1.628 * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
