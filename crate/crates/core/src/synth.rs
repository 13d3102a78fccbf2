//! Synthetic series with known scaling, used to validate the estimators.
//!
//! All generators are pure functions of their parameters and seed. The random stream
//! is [`RNG_ALGORITHM`], which is portable across platforms.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::transform::DerivedSeries;

/// Identity of the random stream, recorded in synthetic outputs.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng/rand_chacha-0.9 seed_from_u64; normals: rand_distr-0.5 StandardNormal";

pub const MIN_NOISE_LEN: usize = 64;
pub const MIN_CASCADE_LEVELS: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("series length {n} is below the minimum {min}")]
    TooShort { n: usize, min: usize },
    #[error("Hurst parameter {0} is outside (0, 1)")]
    InvalidHurst(f64),
    #[error("cascade weight {0} is outside (0.5, 1)")]
    InvalidWeight(f64),
    #[error("cascade needs at least {MIN_CASCADE_LEVELS} levels, got {0}")]
    TooFewLevels(u32),
}

/// First date assigned to synthetic series (consecutive days thereafter).
pub fn synthetic_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn into_series<T: Scalar>(name: String, values: Vec<f64>) -> DerivedSeries<T> {
    DerivedSeries::from_values(
        name,
        synthetic_epoch(),
        values.into_iter().map(T::of).collect(),
    )
    .expect("generators emit finite values")
}

/// i.i.d. standard normal draws.
pub fn gaussian_noise<T: Scalar>(n: usize, seed: u64) -> Result<DerivedSeries<T>, SynthError> {
    if n < MIN_NOISE_LEN {
        return Err(SynthError::TooShort {
            n,
            min: MIN_NOISE_LEN,
        });
    }
    let mut r = rng(seed);
    let values = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    Ok(into_series(format!("noise-seed{seed}"), values))
}

/// Autocovariance of unit-variance fractional Gaussian noise at `lag`.
pub fn fgn_autocovariance(hurst: f64, lag: usize) -> f64 {
    let k = lag as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgnMethod {
    /// Exact circulant embedding.
    Exact,
    /// Negative embedding eigenvalues were clipped to zero; covariance is approximate.
    ClippedEmbedding,
}

/// Eigenvalues of the minimal power-of-two circulant embedding of the `n`-point fGn
/// covariance matrix.
pub fn circulant_eigenvalues(n: usize, hurst: f64) -> Vec<f64> {
    let m = n.next_power_of_two();
    let size = 2 * m;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|k| {
            let lag = if k <= m { k } else { size - k };
            Complex::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

/// Stationary unit-variance fractional Gaussian noise by circulant embedding
/// (Davies-Harte). Falls back to clipping negative eigenvalues, with a warning, if
/// the embedding is not positive semi-definite.
pub fn fgn_with_method<T: Scalar>(
    n: usize,
    hurst: f64,
    seed: u64,
) -> Result<(DerivedSeries<T>, FgnMethod), SynthError> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(SynthError::InvalidHurst(hurst));
    }
    if n < MIN_NOISE_LEN {
        return Err(SynthError::TooShort {
            n,
            min: MIN_NOISE_LEN,
        });
    }
    let mut lambda = circulant_eigenvalues(n, hurst);
    let size = lambda.len();
    let peak = lambda.iter().copied().fold(0.0, f64::max);
    let mut method = FgnMethod::Exact;
    for l in lambda.iter_mut() {
        if *l < 0.0 {
            if *l < -1e-10 * peak {
                method = FgnMethod::ClippedEmbedding;
            }
            *l = 0.0;
        }
    }
    if method == FgnMethod::ClippedEmbedding {
        log::warn!("fGn embedding for n={n}, H={hurst} is not PSD; clipping negative eigenvalues");
    }

    let mut r = rng(seed);
    let mut w: Vec<Complex<f64>> = lambda
        .iter()
        .map(|l| {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = r.sample(StandardNormal);
            Complex::new(re, im) * (l / size as f64).sqrt()
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut w);
    let values = w[..n].iter().map(|c| c.re).collect();
    Ok((
        into_series(format!("fgn-H{hurst}-seed{seed}"), values),
        method,
    ))
}

pub fn fgn<T: Scalar>(n: usize, hurst: f64, seed: u64) -> Result<DerivedSeries<T>, SynthError> {
    fgn_with_method(n, hurst, seed).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    /// Series length is `2^levels`.
    pub levels: u32,
    /// Weight of the heavier half, in (0.5, 1).
    pub weight: f64,
    /// `None`: heavier half always on the left. `Some(seed)`: order drawn per node.
    pub seed: Option<u64>,
}

impl CascadeSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.levels < MIN_CASCADE_LEVELS {
            return Err(SynthError::TooFewLevels(self.levels));
        }
        if !(self.weight > 0.5 && self.weight < 1.0) {
            return Err(SynthError::InvalidWeight(self.weight));
        }
        Ok(())
    }
}

/// Deterministic multiplicative binomial measure on `2^levels` cells.
pub fn binomial_cascade<T: Scalar>(spec: &CascadeSpec) -> Result<DerivedSeries<T>, SynthError> {
    spec.validate()?;
    let p = spec.weight;
    let mut r = spec.seed.map(rng);
    let mut cells = vec![1.0f64];
    for _ in 0..spec.levels {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for &c in &cells {
            let flip = r.as_mut().is_some_and(|r| r.random::<bool>());
            let (left, right) = if flip { (1.0 - p, p) } else { (p, 1.0 - p) };
            next.push(c * left);
            next.push(c * right);
        }
        cells = next;
    }
    let name = match spec.seed {
        Some(s) => format!("cascade-p{p}-k{}-seed{s}", spec.levels),
        None => format!("cascade-p{p}-k{}", spec.levels),
    };
    Ok(into_series(name, cells))
}

/// Closed-form `h(q)` of the binomial cascade: `(1 - log2(p^q + (1-p)^q)) / q`, and at
/// `q = 0` its limit `-(ln p + ln(1-p)) / (2 ln 2)`.
pub fn analytic_cascade_ghe<T: Scalar>(weight: T, q: T) -> T {
    let one = T::one();
    let lower = one - weight;
    if q == T::zero() {
        return -(weight.ln() + lower.ln()) / (T::of(2.0) * T::LN_2());
    }
    (one - (weight.powf(q) + lower.powf(q)).log2()) / q
}

/// Uniform random permutation of the values; dates stay in place.
pub fn shuffle<T: Scalar>(series: &DerivedSeries<T>, seed: u64) -> DerivedSeries<T> {
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng(seed));
    series
        .with_values(values)
        .expect("a permutation keeps every invariant")
}
