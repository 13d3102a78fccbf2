//! Finite-sample correction of a measured Hurst exponent,
//! `H2(n) = H2 * n / (n + a1)`, where `n` is the number of samples per volatility
//! estimate and `H2` the `n -> infinity` value.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

/// Default `a1` (absolute returns correspond to `n = 1`, so the correction is x4).
pub const DEFAULT_A1: f64 = 3.0;
pub const MAX_ITERATIONS: usize = 200;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("a1 must be positive and finite, got {0}")]
    InvalidA1(f64),
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
    #[error("need at least two distinct sample sizes")]
    SingularFit,
    #[error("measured exponents must be positive; got {0} at n = {1}")]
    NonPositiveExponent(f64, usize),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("fit left the admissible region: H2 = {h2}, a1 = {a1}")]
    OutOfDomain { h2: f64, a1: f64 },
}

/// Asymptotic exponent `H2 = H2(n) (n + a1) / n`.
pub fn apply_correction<T: Scalar>(h2_measured: T, n: usize, a1: T) -> Result<T, ScalingError> {
    if n == 0 {
        return Err(ScalingError::InvalidSampleSize);
    }
    if !(a1 > T::zero() && a1.is_finite()) {
        return Err(ScalingError::InvalidA1(a1.as_f64()));
    }
    let n = T::of_usize(n);
    Ok(h2_measured * (n + a1) / n)
}

/// Model value `H2 n / (n + a1)`.
pub fn model<T: Scalar>(h2_inf: T, a1: T, n: usize) -> T {
    let n = T::of_usize(n);
    h2_inf * n / (n + a1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit<T> {
    pub h2_inf: T,
    pub a1: T,
    /// Euclidean norm of the residuals at the solution.
    pub residual_norm: T,
    pub points: Vec<(usize, T)>,
    pub iterations: usize,
}

/// Levenberg-Marquardt fit of `(H2, a1)`, started from `H2 = max H2(n)`, `a1 = 3`.
///
/// Stops once the gradient has shrunk by [`GRADIENT_TOLERANCE`] relative to its
/// starting value, the step stalls at machine precision, or the residual vanishes.
pub fn fit_scaling<T: Scalar>(points: &[(usize, T)]) -> Result<ScalingFit<T>, ScalingError> {
    if points.iter().any(|(n, _)| *n == 0) {
        return Err(ScalingError::InvalidSampleSize);
    }
    if let Some(&(n, h)) = points.iter().find(|(_, h)| !(*h > T::zero())) {
        return Err(ScalingError::NonPositiveExponent(h.as_f64(), n));
    }
    let first = points.first().map(|p| p.0);
    if points.len() < 2 || points.iter().all(|p| Some(p.0) == first) {
        return Err(ScalingError::SingularFit);
    }

    let cost = |h: T, a: T| -> Option<T> {
        let mut c = T::zero();
        for &(n, y) in points {
            let nf = T::of_usize(n);
            if nf + a <= T::zero() {
                return None;
            }
            let r = h * nf / (nf + a) - y;
            c = c + r * r;
        }
        Some(c)
    };

    let mut h = points.iter().map(|p| p.1).fold(T::zero(), T::max);
    let mut a = T::of(DEFAULT_A1);
    let mut c = cost(h, a).expect("initial a1 is positive");
    let mut mu = T::of(1e-3);
    // gradient tolerance relative to the starting gradient
    let mut tol = None;

    for iter in 0..MAX_ITERATIONS {
        // normal equations of the Gauss-Newton step
        let (mut jhh, mut jha, mut jaa, mut gh, mut ga) =
            (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for &(n, y) in points {
            let nf = T::of_usize(n);
            let d = nf + a;
            let dh = nf / d;
            let da = -h * nf / (d * d);
            let r = h * dh - y;
            jhh = jhh + dh * dh;
            jha = jha + dh * da;
            jaa = jaa + da * da;
            gh = gh + dh * r;
            ga = ga + da * r;
        }
        let g = gh.abs().max(ga.abs());
        let tol = *tol.get_or_insert(g * T::of(GRADIENT_TOLERANCE));
        if g <= tol || c == T::zero() {
            return finish(h, a, c, points, iter);
        }
        loop {
            let (m11, m22) = (jhh * (T::one() + mu), jaa * (T::one() + mu));
            let det = m11 * m22 - jha * jha;
            let step_h = -(m22 * gh - jha * ga) / det;
            let step_a = -(m11 * ga - jha * gh) / det;
            let (nh, na) = (h + step_h, a + step_a);
            match cost(nh, na) {
                Some(nc) if det.is_finite() && det != T::zero() && nc <= c => {
                    let converged = (step_h.abs() + step_a.abs())
                        <= T::epsilon() * (T::one() + h.abs() + a.abs());
                    h = nh;
                    a = na;
                    c = nc;
                    mu = (mu / T::of(3.0)).max(T::of(1e-12));
                    if converged {
                        return finish(h, a, c, points, iter + 1);
                    }
                    break;
                }
                _ => {
                    mu = mu * T::of(4.0);
                    if mu > T::of(1e12) {
                        // no descent direction left: at a minimum to working precision
                        return finish(h, a, c, points, iter + 1);
                    }
                }
            }
        }
    }
    Err(ScalingError::NonConvergence(MAX_ITERATIONS))
}

fn finish<T: Scalar>(
    h: T,
    a: T,
    cost: T,
    points: &[(usize, T)],
    iterations: usize,
) -> Result<ScalingFit<T>, ScalingError> {
    if !(a > T::zero() && h > T::zero() && h < T::one()) {
        return Err(ScalingError::OutOfDomain {
            h2: h.as_f64(),
            a1: a.as_f64(),
        });
    }
    Ok(ScalingFit {
        h2_inf: h,
        a1: a,
        residual_norm: cost.sqrt(),
        points: points.to_vec(),
        iterations,
    })
}
