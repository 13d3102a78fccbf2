//! Multifractal detrended fluctuation analysis.
//!
//! The pipeline is profile -> forward/backward segment variances after polynomial
//! detrending -> q-th order fluctuation function -> log-log slope `h(q)`.
//!
//! Each scale is evaluated independently and every sum runs in a fixed order, so
//! results are bit-identical at any degree of parallelism.

mod config;
mod detrend;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    q_range, MfdfaConfig, ScaleGrid, DEFAULT_DETREND_ORDER, DEFAULT_N_SCALES, DEFAULT_Q_MAX,
    DEFAULT_Q_MIN, DEFAULT_Q_STEP, DEFAULT_S_MIN,
};
pub use detrend::{segment_starts, segment_variances, PolyBasis};

use crate::regress::ols;
use crate::scalar::{mean, ordered_sum, Scalar};
use crate::transform::DerivedSeries;

/// Adjacent-q increase of `h` beyond this marks a curve as suspect.
pub const MONOTONICITY_TOLERANCE: f64 = 0.02;

/// Minimum number of scales in a log-log fit.
pub const MIN_FIT_SCALES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfdfaError {
    #[error("series too short: need at least {needed} values, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("scale {scale} exceeds the allowed maximum for a series of length {len}")]
    ScaleTooLarge { scale: usize, len: usize },
    #[error("scale {scale} is too small for a degree-{order} fit")]
    ScaleTooSmall { scale: usize, order: usize },
    #[error("every segment variance is zero at scale {0}")]
    AllZeroVariances(usize),
    #[error("only {found} scales inside the fit range, need at least 4")]
    InsufficientScales { found: usize },
    #[error("input series is constant")]
    DegenerateSeries,
    #[error("q grid is not symmetric about zero: {0} has no counterpart")]
    AsymmetricQGrid(f64),
    #[error("q = {0} is not on the grid")]
    QNotOnGrid(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// `Y(i) = sum_{j <= i} (x_j - <x>)`.
pub fn profile<T: Scalar>(series: &[T]) -> Result<Vec<T>, MfdfaError> {
    if series.len() < 2 {
        return Err(MfdfaError::TooShort {
            needed: 2,
            found: series.len(),
        });
    }
    let m = mean(series);
    let mut acc = T::zero();
    Ok(series
        .iter()
        .map(|v| {
            acc = acc + (*v - m);
            acc
        })
        .collect())
}

/// Result of [`fluctuation_function`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fluctuation<T> {
    pub value: T,
    /// Zero-variance segments left out (only for `q <= 0`).
    pub excluded: usize,
}

/// q-th order power mean of the segment variances, `{mean (F^2)^(q/2)}^(1/q)`, with
/// the logarithmic average `exp(mean ln F^2 / 2)` at `q = 0`.
///
/// Evaluated in log space so large |q| cannot overflow in either float width.
pub fn fluctuation_function<T: Scalar>(
    variances: &[T],
    q: T,
) -> Result<Fluctuation<T>, MfdfaError> {
    let positive = variances.iter().filter(|v| **v > T::zero()).count();
    if positive == 0 {
        return Err(MfdfaError::AllZeroVariances(0));
    }
    let half = T::of(0.5);
    if q <= T::zero() {
        let logs = variances.iter().filter(|v| **v > T::zero()).map(|v| v.ln());
        let excluded = variances.len() - positive;
        let value = if q == T::zero() {
            (ordered_sum(logs) / T::of_usize(positive) * half).exp()
        } else {
            let terms: Vec<T> = logs.map(|l| q * half * l).collect();
            ((log_sum_exp(&terms) - T::of_usize(positive).ln()) / q).exp()
        };
        return Ok(Fluctuation { value, excluded });
    }
    // zeros contribute 0 to a positive moment
    let terms: Vec<T> = variances
        .iter()
        .filter(|v| **v > T::zero())
        .map(|v| q * half * v.ln())
        .collect();
    let value = ((log_sum_exp(&terms) - T::of_usize(variances.len()).ln()) / q).exp();
    Ok(Fluctuation { value, excluded: 0 })
}

fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    max + ordered_sum(terms.iter().map(|t| (*t - max).exp())).ln()
}

/// `F_q(s)` over the full (q, s) grid plus the raw segment variances per scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSurface<T> {
    scales: Vec<usize>,
    q_grid: Vec<T>,
    /// `values[qi][si]`
    values: Vec<Vec<T>>,
    variances: Vec<Vec<T>>,
    zero_segments: Vec<usize>,
}

impl<T: Scalar> FluctuationSurface<T> {
    /// Builds a surface from precomputed values (`values[qi][si]`), without segment data.
    pub fn from_values(scales: Vec<usize>, q_grid: Vec<T>, values: Vec<Vec<T>>) -> Self {
        assert_eq!(values.len(), q_grid.len());
        assert!(values.iter().all(|row| row.len() == scales.len()));
        let n = scales.len();
        Self {
            scales,
            q_grid,
            values,
            variances: vec![Vec::new(); n],
            zero_segments: vec![0; n],
        }
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn q_grid(&self) -> &[T] {
        &self.q_grid
    }

    /// `F_q(s)` for grid indices.
    pub fn value(&self, qi: usize, si: usize) -> T {
        self.values[qi][si]
    }

    pub fn row(&self, qi: usize) -> &[T] {
        &self.values[qi]
    }

    /// The `2 Ns` segment variances at scale index `si`.
    pub fn segment_variances(&self, si: usize) -> &[T] {
        &self.variances[si]
    }

    /// Zero-variance segments at scale index `si` (excluded from `q <= 0` moments).
    pub fn zero_segments(&self, si: usize) -> usize {
        self.zero_segments[si]
    }

    /// Number of (q, s) cells where `F_q(s)` decreases with q beyond rounding.
    pub fn order_violations(&self) -> usize {
        let tol = T::of(1e3) * T::epsilon();
        (0..self.scales.len())
            .map(|si| {
                self.values
                    .windows(2)
                    .filter(|w| w[1][si] < w[0][si] * (T::one() - tol))
                    .count()
            })
            .sum()
    }
}

/// Computes the fluctuation surface of `series` over `scales` and `q_grid`.
pub fn fluctuation_surface<T: Scalar>(
    series: &[T],
    scales: &[usize],
    q_grid: &[T],
    order: usize,
) -> Result<FluctuationSurface<T>, MfdfaError> {
    let y = profile(series)?;
    let per_scale: Vec<(Vec<T>, Vec<T>, usize)> = scales
        .par_iter()
        .map(|&s| {
            let variances = segment_variances(&y, s, order)?;
            let f = q_grid
                .iter()
                .map(|&q| {
                    fluctuation_function(&variances, q)
                        .map(|f| f.value)
                        .map_err(|_| MfdfaError::AllZeroVariances(s))
                })
                .collect::<Result<Vec<T>, _>>()?;
            let zeros = variances.iter().filter(|v| **v <= T::zero()).count();
            Ok((f, variances, zeros))
        })
        .collect::<Result<_, MfdfaError>>()?;

    let mut values = vec![Vec::with_capacity(scales.len()); q_grid.len()];
    let mut variances = Vec::with_capacity(scales.len());
    let mut zero_segments = Vec::with_capacity(scales.len());
    for (f, v, z) in per_scale {
        for (row, fq) in values.iter_mut().zip(f) {
            row.push(fq);
        }
        variances.push(v);
        zero_segments.push(z);
    }
    Ok(FluctuationSurface {
        scales: scales.to_vec(),
        q_grid: q_grid.to_vec(),
        values,
        variances,
        zero_segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhePoint<T> {
    pub q: T,
    pub h: T,
    pub stderr: T,
    pub r2: T,
}

/// Slope of `ln F_q(s)` against `ln s` over the scales inside `fit_range`.
pub fn ghe_fit<T: Scalar>(
    surface: &FluctuationSurface<T>,
    q: T,
    fit_range: Option<(usize, usize)>,
) -> Result<GhePoint<T>, MfdfaError> {
    let qi = config::q_index(&surface.q_grid, q, T::of(1e-6))
        .ok_or(MfdfaError::QNotOnGrid(q.as_f64()))?;
    let (lo, hi) = fit_range.unwrap_or((0, usize::MAX));
    let (x, y): (Vec<T>, Vec<T>) = surface
        .scales
        .iter()
        .zip(&surface.values[qi])
        .filter(|(s, _)| (lo..=hi).contains(*s))
        .map(|(s, f)| (T::of_usize(*s).ln(), f.ln()))
        .unzip();
    if x.len() < MIN_FIT_SCALES {
        return Err(MfdfaError::InsufficientScales { found: x.len() });
    }
    let fit = ols(&x, &y).ok_or(MfdfaError::InsufficientScales { found: x.len() })?;
    Ok(GhePoint {
        q: surface.q_grid[qi],
        h: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Good,
    Suspect,
}

impl Quality {
    pub fn label(self) -> &'static str {
        match self {
            Quality::Good => "good",
            Quality::Suspect => "suspect",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Adjacent grid pairs where h rises by more than [`MONOTONICITY_TOLERANCE`].
    pub h_monotonicity_violations: usize,
    /// (q, s) cells where `F_q(s)` decreases in q.
    pub fq_order_violations: usize,
    /// Zero-variance segments over all scales.
    pub zero_variance_segments: usize,
}

/// Generalized Hurst exponents over a q grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GheCurve<T> {
    points: Vec<GhePoint<T>>,
    config: Option<MfdfaConfig<T>>,
    scales: Vec<usize>,
    diagnostics: Diagnostics,
}

impl<T: Scalar> GheCurve<T> {
    /// A curve from bare points (e.g. read back from `ghe.csv`). Points must be sorted by q.
    pub fn from_points(points: Vec<GhePoint<T>>) -> Self {
        let mut curve = Self {
            points,
            config: None,
            scales: Vec::new(),
            diagnostics: Diagnostics::default(),
        };
        curve.diagnostics.h_monotonicity_violations = curve.count_h_violations();
        curve
    }

    /// A curve with a given `h(q)` and zero errors; handy for synthetic curves.
    pub fn from_fn(q_grid: &[T], h: impl Fn(T) -> T) -> Self {
        Self::from_points(
            q_grid
                .iter()
                .map(|&q| GhePoint {
                    q,
                    h: h(q),
                    stderr: T::zero(),
                    r2: T::one(),
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[GhePoint<T>] {
        &self.points
    }

    pub fn q_grid(&self) -> Vec<T> {
        self.points.iter().map(|p| p.q).collect()
    }

    pub fn config(&self) -> Option<&MfdfaConfig<T>> {
        self.config.as_ref()
    }

    /// Scales used for the estimate (empty for curves built from points).
    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn point(&self, q: T) -> Option<&GhePoint<T>> {
        let tol = T::of(1e-6);
        self.points.iter().find(|p| (p.q - q).abs() <= tol)
    }

    pub fn h(&self, q: T) -> Option<T> {
        self.point(q).map(|p| p.h)
    }

    pub fn quality(&self) -> Quality {
        if self.diagnostics.h_monotonicity_violations > 0
            || self.diagnostics.fq_order_violations > 0
        {
            Quality::Suspect
        } else {
            Quality::Good
        }
    }

    fn count_h_violations(&self) -> usize {
        let tol = T::of(MONOTONICITY_TOLERANCE);
        self.points
            .windows(2)
            .filter(|w| w[1].h - w[0].h > tol)
            .count()
    }
}

/// Full MFDFA of a series.
pub fn mfdfa<T: Scalar>(
    series: &DerivedSeries<T>,
    config: &MfdfaConfig<T>,
) -> Result<GheCurve<T>, MfdfaError> {
    mfdfa_values(series.values(), config).map(|(curve, _)| curve)
}

/// MFDFA on a bare slice, also returning the fluctuation surface.
pub fn mfdfa_values<T: Scalar>(
    values: &[T],
    config: &MfdfaConfig<T>,
) -> Result<(GheCurve<T>, FluctuationSurface<T>), MfdfaError> {
    let scales = config.scales_for(values.len())?;
    if values.iter().all(|v| *v == values[0]) {
        return Err(MfdfaError::DegenerateSeries);
    }
    let surface = fluctuation_surface(values, &scales, &config.q_grid, config.detrend_order)?;
    let points = config
        .q_grid
        .iter()
        .map(|&q| ghe_fit(&surface, q, config.fit_range))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = points.iter().find(|p| !p.h.is_finite()) {
        return Err(MfdfaError::InvalidConfig(format!(
            "non-finite h at q = {}",
            p.q
        )));
    }
    let mut curve = GheCurve {
        points,
        config: Some(config.clone()),
        scales: scales.clone(),
        diagnostics: Diagnostics {
            h_monotonicity_violations: 0,
            fq_order_violations: surface.order_violations(),
            zero_variance_segments: surface.zero_segments.iter().sum(),
        },
    };
    curve.diagnostics.h_monotonicity_violations = curve.count_h_violations();
    Ok((curve, surface))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_small_example() {
        assert_eq!(profile(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, -1.0, 0.0]);
        assert!(matches!(profile(&[1.0]), Err(MfdfaError::TooShort { .. })));
    }

    #[test]
    fn fluctuation_constant_variances() {
        for q in [-5.0f64, -1.0, 0.0, 0.5, 2.0, 5.0] {
            let f = fluctuation_function(&[0.09; 12], q).unwrap();
            assert!((f.value - 0.3).abs() < 1e-14, "q={q}: {}", f.value);
        }
    }

    #[test]
    fn fluctuation_q0_limit_value() {
        let f = fluctuation_function(&[1.0, 4.0], 0.0).unwrap();
        assert!((f.value - 4f64.powf(0.25)).abs() < 1e-15);
        assert!((f.value - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn fluctuation_q2_is_rms() {
        let v = [0.5, 1.5, 2.0, 0.25];
        let rms = (v.iter().sum::<f64>() / 4.0).sqrt();
        assert!((fluctuation_function(&v, 2.0).unwrap().value - rms).abs() < 1e-14);
    }

    #[test]
    fn fluctuation_zero_segments() {
        let v = [0.0, 1.0, 4.0];
        let neg = fluctuation_function(&v, -2.0).unwrap();
        assert_eq!(neg.excluded, 1);
        assert!((neg.value - (0.5f64 * (1.0 + 0.25)).powf(-0.5)).abs() < 1e-14);
        let pos = fluctuation_function(&v, 2.0).unwrap();
        assert!((pos.value - (5.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert_eq!(
            fluctuation_function(&[0.0, 0.0], 1.0).unwrap_err(),
            MfdfaError::AllZeroVariances(0)
        );
    }

    #[test]
    fn large_negative_q_does_not_overflow_in_f32() {
        let v = [1e-30f32, 1e-25, 1e-20];
        let f = fluctuation_function(&v, -5.0).unwrap().value;
        assert!(f.is_finite() && f > 0.0);
    }

    #[test]
    fn exact_power_law_fit() {
        let scales = vec![16, 32, 64, 128, 256];
        let f: Vec<f64> = scales.iter().map(|&s| 1.7 * (s as f64).sqrt()).collect();
        let surface = FluctuationSurface::from_values(scales, vec![2.0], vec![f]);
        let p = ghe_fit(&surface, 2.0, None).unwrap();
        assert!((p.h - 0.5).abs() < 1e-14);
        assert!((p.r2 - 1.0).abs() < 1e-14);
        assert!(matches!(
            ghe_fit(&surface, 2.0, Some((16, 64))),
            Err(MfdfaError::InsufficientScales { found: 3 })
        ));
        assert!(matches!(
            ghe_fit(&surface, 1.0, None),
            Err(MfdfaError::QNotOnGrid(_))
        ));
    }

    #[test]
    fn constant_series_is_degenerate() {
        let x = vec![0.3; 500];
        assert_eq!(
            mfdfa_values(&x, &MfdfaConfig::default()).unwrap_err(),
            MfdfaError::DegenerateSeries
        );
    }

    #[test]
    fn monotonicity_flag() {
        let q = q_range::<f64>(-1.0, 1.0, 0.5).unwrap();
        let good = GheCurve::from_fn(&q, |q| 0.5 - 0.01 * q);
        assert_eq!(good.quality(), Quality::Good);
        let bad = GheCurve::from_fn(&q, |q| 0.5 + 0.1 * q);
        assert_eq!(bad.quality(), Quality::Suspect);
        assert_eq!(bad.diagnostics().h_monotonicity_violations, 4);
    }
}
