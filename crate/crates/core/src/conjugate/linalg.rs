//! Dense helpers for the small (degree + 1)-sized systems of the linear model.
//! Matrices are row-major `Vec<T>` of side `n`.

use crate::scalar::Scalar;

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn mat_vec<T: Scalar>(m: &[T], v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// Lower-triangular `L` with `L Lᵀ = a` for symmetric positive semi-definite
/// `a`. Pivots below a relative tolerance are treated as exact zeros, so
/// singular (e.g. all-zero) covariances are accepted. Returns `None` if a
/// pivot is clearly negative.
pub(crate) fn psd_cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let tol = T::lit(1e-12) * scale.max(T::min_positive_value());
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut pivot = a[j * n + j];
        for k in 0..j {
            pivot = pivot - l[j * n + k] * l[j * n + k];
        }
        if pivot < -tol * T::lit(1e3) {
            return None;
        }
        if pivot <= tol {
            continue;
        }
        let d = pivot.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

pub(crate) fn is_symmetric<T: Scalar>(a: &[T], n: usize) -> bool {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-10) * scale.max(T::one());
    (0..n).all(|i| (0..i).all(|j| (a[i * n + j] - a[j * n + i]).abs() <= tol))
}

/// `x ↦ L ξ` for lower-triangular `L`.
pub(crate) fn lower_mul<T: Scalar>(l: &[T], xi: &[T]) -> Vec<T> {
    let n = xi.len();
    (0..n)
        .map(|i| dot(&l[i * n..i * n + i + 1], &xi[..=i]))
        .collect()
}
