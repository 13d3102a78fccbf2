//! The three analysis series (returns, absolute returns, volatility increments) and
//! their descriptive statistics with delete-one-block jackknife errors.
//!
//! Assumptions the input data cannot settle on its own:
//! - zero absolute returns are dropped before taking logs (no epsilon floor), and the
//!   number dropped is reported on the resulting series;
//! - jackknife errors come from contiguous blocks (20 by default), the remainder going
//!   to the final block;
//! - kurtosis is raw, so a Gaussian sits at 3.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PriceSeries;
use crate::scalar::{ordered_sum, Scalar};

pub const DEFAULT_JACKKNIFE_BLOCKS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Returns,
    #[serde(rename = "abs_returns", alias = "absolute_returns")]
    AbsoluteReturns,
    #[serde(rename = "vol_increments", alias = "volatility_increments")]
    VolatilityIncrements,
    /// A series read or generated as-is (synthetic generators, user-supplied values).
    Raw,
}

impl SeriesKind {
    /// Stable short label used in file names and CSV columns.
    pub fn label(self) -> &'static str {
        match self {
            SeriesKind::Returns => "returns",
            SeriesKind::AbsoluteReturns => "abs_returns",
            SeriesKind::VolatilityIncrements => "vol_increments",
            SeriesKind::Raw => "raw",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "returns" => Some(SeriesKind::Returns),
            "abs_returns" | "abs-returns" | "absolute_returns" => Some(SeriesKind::AbsoluteReturns),
            "vol_increments" | "vol-increments" | "volatility_increments" => {
                Some(SeriesKind::VolatilityIncrements)
            }
            "raw" => Some(SeriesKind::Raw),
            _ => None,
        }
    }

    pub const DERIVED: [SeriesKind; 3] = [
        SeriesKind::Returns,
        SeriesKind::AbsoluteReturns,
        SeriesKind::VolatilityIncrements,
    ];
}

impl std::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("series too short: need at least {needed} values, found {found}")]
    SeriesTooShort { needed: usize, found: usize },
    #[error("expected a {expected} series, got {found}")]
    WrongKind {
        expected: SeriesKind,
        found: SeriesKind,
    },
    #[error("fewer than 2 nonzero absolute returns ({0})")]
    TooFewNonZero(usize),
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("absolute return at index {0} is negative")]
    NegativeAbsolute(usize),
    #[error("{values} values but {dates} dates")]
    LengthMismatch { values: usize, dates: usize },
    #[error("jackknife needs at least 2 blocks, got {0}")]
    InvalidBlocks(usize),
}

/// A real-valued series tagged with how it was derived.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSeries<T> {
    kind: SeriesKind,
    source: String,
    dates: Vec<NaiveDate>,
    values: Vec<T>,
    dropped_zeros: usize,
}

impl<T: Scalar> DerivedSeries<T> {
    pub fn new(
        kind: SeriesKind,
        source: impl Into<String>,
        dates: Vec<NaiveDate>,
        values: Vec<T>,
    ) -> Result<Self, TransformError> {
        if dates.len() != values.len() {
            return Err(TransformError::LengthMismatch {
                values: values.len(),
                dates: dates.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite(i));
        }
        if kind == SeriesKind::AbsoluteReturns {
            if let Some(i) = values.iter().position(|v| *v < T::zero()) {
                return Err(TransformError::NegativeAbsolute(i));
            }
        }
        Ok(Self {
            kind,
            source: source.into(),
            dates,
            values,
            dropped_zeros: 0,
        })
    }

    /// A `Raw` series with consecutive daily dates from `start`; used for synthetic data.
    pub fn from_values(
        source: impl Into<String>,
        start: NaiveDate,
        values: Vec<T>,
    ) -> Result<Self, TransformError> {
        let dates = start.iter_days().take(values.len()).collect::<Vec<_>>();
        Self::new(SeriesKind::Raw, source, dates, values)
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero absolute returns removed while building volatility increments.
    pub fn dropped_zeros(&self) -> usize {
        self.dropped_zeros
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            kind: self.kind,
            source: self.source.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
            dropped_zeros: 0,
        }
    }

    /// Same dates, kind and source with replaced values (shuffled surrogates, rescaling).
    pub fn with_values(&self, values: Vec<T>) -> Result<Self, TransformError> {
        Self::new(self.kind, self.source.clone(), self.dates.clone(), values)
    }
}

/// `r(t) = ln P(t) - ln P(t-1)`, dated at the later observation.
pub fn log_returns<T: Scalar>(series: &PriceSeries<T>) -> Result<DerivedSeries<T>, TransformError> {
    let obs = series.observations();
    if obs.len() < 2 {
        return Err(TransformError::SeriesTooShort {
            needed: 2,
            found: obs.len(),
        });
    }
    let values = obs
        .windows(2)
        .map(|w| w[1].close.ln() - w[0].close.ln())
        .collect();
    let dates = obs[1..].iter().map(|o| o.date).collect();
    DerivedSeries::new(SeriesKind::Returns, series.instrument(), dates, values)
}

pub fn absolute_returns<T: Scalar>(
    returns: &DerivedSeries<T>,
) -> Result<DerivedSeries<T>, TransformError> {
    expect_kind(returns, SeriesKind::Returns)?;
    if returns.is_empty() {
        return Err(TransformError::SeriesTooShort {
            needed: 1,
            found: 0,
        });
    }
    let values = returns.values.iter().map(|v| v.abs()).collect();
    DerivedSeries::new(
        SeriesKind::AbsoluteReturns,
        returns.source.clone(),
        returns.dates.clone(),
        values,
    )
}

/// `VI(t) = ln AR(t) - ln AR(t-1)` over the series with zero absolute returns removed.
pub fn volatility_increments<T: Scalar>(
    abs_returns: &DerivedSeries<T>,
) -> Result<DerivedSeries<T>, TransformError> {
    expect_kind(abs_returns, SeriesKind::AbsoluteReturns)?;
    let kept: Vec<(NaiveDate, T)> = abs_returns
        .dates
        .iter()
        .zip(&abs_returns.values)
        .filter(|(_, v)| **v > T::zero())
        .map(|(d, v)| (*d, *v))
        .collect();
    if kept.len() < 2 {
        return Err(TransformError::TooFewNonZero(kept.len()));
    }
    let values = kept.windows(2).map(|w| w[1].1.ln() - w[0].1.ln()).collect();
    let dates = kept[1..].iter().map(|(d, _)| *d).collect();
    let mut out = DerivedSeries::new(
        SeriesKind::VolatilityIncrements,
        abs_returns.source.clone(),
        dates,
        values,
    )?;
    out.dropped_zeros = abs_returns.len() - kept.len();
    Ok(out)
}

/// Returns, absolute returns and volatility increments, in that order.
pub fn derive_all<T: Scalar>(
    prices: &PriceSeries<T>,
) -> Result<[DerivedSeries<T>; 3], TransformError> {
    let r = log_returns(prices)?;
    let ar = absolute_returns(&r)?;
    let vi = volatility_increments(&ar)?;
    Ok([r, ar, vi])
}

fn expect_kind<T>(s: &DerivedSeries<T>, expected: SeriesKind) -> Result<(), TransformError> {
    if s.kind != expected {
        return Err(TransformError::WrongKind {
            expected,
            found: s.kind,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    /// Jackknife standard error.
    pub error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport<T> {
    pub n: usize,
    pub block_count: usize,
    pub mean: Estimate<T>,
    /// Unbiased (n - 1) sample variance.
    pub variance: Estimate<T>,
    /// `None` when the variance is zero.
    pub skewness: Option<Estimate<T>>,
    /// Raw kurtosis; `None` when the variance is zero.
    pub kurtosis: Option<Estimate<T>>,
}

#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    mean: T,
    variance: T,
    skewness: T,
    kurtosis: T,
}

/// Two-pass moments. Skewness and kurtosis use population central moments
/// (m3 / m2^1.5, m4 / m2^2).
fn moments<T: Scalar, I>(values: I) -> Moments<T>
where
    I: Iterator<Item = T> + Clone,
{
    let n = T::of_usize(values.clone().count());
    let mean = ordered_sum(values.clone()) / n;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let variance = m2 / (n - T::one());
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    Moments {
        mean,
        variance,
        skewness: m3 / m2.powf(T::of(1.5)),
        kurtosis: m4 / (m2 * m2),
    }
}

/// Mean, variance, skewness and raw kurtosis with delete-one-block jackknife errors.
pub fn descriptive_stats<T: Scalar>(
    series: &DerivedSeries<T>,
    blocks: usize,
) -> Result<StatsReport<T>, TransformError> {
    if blocks < 2 {
        return Err(TransformError::InvalidBlocks(blocks));
    }
    let x = series.values();
    let n = x.len();
    if n < 2 * blocks {
        return Err(TransformError::SeriesTooShort {
            needed: 2 * blocks,
            found: n,
        });
    }

    let full = moments(x.iter().copied());
    let degenerate = x.iter().all(|v| *v == x[0]);

    let size = n / blocks;
    let leave_out: Vec<Moments<T>> = (0..blocks)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == blocks { n } else { lo + size };
            moments(x[..lo].iter().chain(&x[hi..]).copied())
        })
        .collect();

    let jackknife = |value: T, pick: fn(&Moments<T>) -> T| -> Estimate<T> {
        let b = T::of_usize(blocks);
        let thetas: Vec<T> = leave_out.iter().map(pick).collect();
        let avg = ordered_sum(thetas.iter().copied()) / b;
        let ss = ordered_sum(thetas.iter().map(|t| (*t - avg) * (*t - avg)));
        Estimate {
            value,
            error: ((b - T::one()) / b * ss).sqrt(),
        }
    };

    let mean = jackknife(full.mean, |m| m.mean);
    if degenerate {
        return Ok(StatsReport {
            n,
            block_count: blocks,
            mean: Estimate {
                value: x[0],
                error: T::zero(),
            },
            variance: Estimate {
                value: T::zero(),
                error: T::zero(),
            },
            skewness: None,
            kurtosis: None,
        });
    }
    Ok(StatsReport {
        n,
        block_count: blocks,
        mean,
        variance: jackknife(full.variance, |m| m.variance),
        skewness: Some(jackknife(full.skewness, |m| m.skewness)),
        kurtosis: Some(jackknife(full.kurtosis, |m| m.kurtosis)),
    })
}
