//! Standard-normal helpers shared by the Gaussian oracles.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Scalar;

/// `Φ⁻¹(p)` for `p` in `(0, 1)`.
///
/// statrs supplies the starting point; one Halley step against the libm
/// `erfc`-based CDF brings it to full double precision.
pub fn standard_normal_quantile(p: f64) -> f64 {
    let z = Normal::standard().inverse_cdf(p);
    if !z.is_finite() {
        return z;
    }
    let err = standard_normal_cdf(z) - p;
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let u = err / pdf;
    z - u / (1.0 + 0.5 * z * u)
}

/// `Φ(z)`, accurate in the lower tail.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper quantile `z` with `P(|Z| > z) = ε`.
pub fn two_sided_z(epsilon: f64) -> f64 {
    standard_normal_quantile(1.0 - 0.5 * epsilon)
}

/// Log-density of `N(mean, variance)` at `y`.
#[inline]
pub fn gaussian_log_pdf<T: Scalar>(y: T, mean: T, variance: T) -> T {
    let d = y - mean;
    let two = T::lit(2.0);
    -(T::TAU() * variance).ln() / two - d * d / (two * variance)
}

/// Differential entropy of `N(·, variance)`: `½ ln(2πe·v)`.
pub fn gaussian_entropy(variance: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).ln()
}
