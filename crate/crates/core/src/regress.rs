//! Ordinary least squares for a single regressor.

use serde::{Deserialize, Serialize};

use crate::scalar::{ordered_sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Standard error of the slope; zero when only two points are fitted.
    pub slope_stderr: T,
    pub r2: T,
}

/// Unweighted OLS of `y` on `x`. `None` when fewer than two points or `x` is constant.
pub fn ols<T: Scalar>(x: &[T], y: &[T]) -> Option<LinearFit<T>> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = T::of_usize(n);
    let mx = ordered_sum(x.iter().copied()) / nf;
    let my = ordered_sum(y.iter().copied()) / nf;
    let sxx = ordered_sum(x.iter().map(|&v| (v - mx) * (v - mx)));
    if sxx <= T::zero() {
        return None;
    }
    let sxy = ordered_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    let syy = ordered_sum(y.iter().map(|&v| (v - my) * (v - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = ordered_sum(x.iter().zip(y).map(|(&a, &b)| {
        let e = b - (intercept + slope * a);
        e * e
    }));
    let slope_stderr = if n > 2 {
        (ssr / T::of_usize(n - 2) / sxx).sqrt()
    } else {
        T::zero()
    };
    let r2 = if syy > T::zero() {
        T::one() - ssr / syy
    } else {
        T::one()
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn known_noisy_fit() {
        // y = x + (+1, -1, -1, +1): slope 1, residual SS 4, Sxx 5
        let x = [0.0f64, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 1.0, 4.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-15);
        assert!((f.slope_stderr - (4.0f64 / 2.0 / 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols(&[1.0], &[2.0]).is_none());
        assert!(ols(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
