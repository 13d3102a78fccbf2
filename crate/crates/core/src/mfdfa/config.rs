use serde::{Deserialize, Serialize};

use super::MfdfaError;
use crate::scalar::Scalar;

pub const DEFAULT_Q_MIN: f64 = -5.0;
pub const DEFAULT_Q_MAX: f64 = 5.0;
pub const DEFAULT_Q_STEP: f64 = 0.25;
pub const DEFAULT_DETREND_ORDER: usize = 3;
pub const DEFAULT_S_MIN: usize = 16;
pub const DEFAULT_N_SCALES: usize = 20;

/// How the scale list is chosen for a series of length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleGrid {
    /// `count` integer scales log-spaced over `[s_min, s_max]`, duplicates removed.
    /// `s_max` defaults to `floor(N / 4)`.
    Auto {
        s_min: usize,
        s_max: Option<usize>,
        count: usize,
    },
    Explicit(Vec<usize>),
}

impl Default for ScaleGrid {
    fn default() -> Self {
        ScaleGrid::Auto {
            s_min: DEFAULT_S_MIN,
            s_max: None,
            count: DEFAULT_N_SCALES,
        }
    }
}

impl ScaleGrid {
    /// Concrete ascending scale list for a series of length `n`.
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>, MfdfaError> {
        match self {
            ScaleGrid::Explicit(scales) => {
                let mut s = scales.clone();
                s.sort_unstable();
                s.dedup();
                Ok(s)
            }
            &ScaleGrid::Auto {
                s_min,
                s_max,
                count,
            } => {
                let s_max = s_max.unwrap_or(n / 4);
                if s_min == 0 || s_max < s_min {
                    return Err(MfdfaError::TooShort {
                        needed: 4 * s_min,
                        found: n,
                    });
                }
                if count < 2 || s_max == s_min {
                    return Ok(vec![s_min]);
                }
                let (lo, hi) = ((s_min as f64).ln(), (s_max as f64).ln());
                let mut s: Vec<usize> = (0..count)
                    .map(|i| {
                        let t = i as f64 / (count - 1) as f64;
                        ((lo + t * (hi - lo)).exp().round() as usize).clamp(s_min, s_max)
                    })
                    .collect();
                s.dedup();
                Ok(s)
            }
        }
    }

    pub fn min_scale(&self) -> usize {
        match self {
            ScaleGrid::Auto { s_min, .. } => *s_min,
            ScaleGrid::Explicit(s) => s.iter().copied().min().unwrap_or(0),
        }
    }
}

/// `count + 1` evenly spaced values from `min` to `max`.
pub fn q_range<T: Scalar>(min: f64, max: f64, step: f64) -> Result<Vec<T>, MfdfaError> {
    if !(step > 0.0) || !(max > min) {
        return Err(MfdfaError::InvalidConfig(format!(
            "q range [{min}, {max}] with step {step} is empty"
        )));
    }
    let count = ((max - min) / step).round() as usize;
    if ((min + count as f64 * step) - max).abs() > 1e-9 * step.max(1.0) {
        return Err(MfdfaError::InvalidConfig(format!(
            "step {step} does not divide [{min}, {max}]"
        )));
    }
    Ok((0..=count).map(|i| T::of(min + i as f64 * step)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaConfig<T> {
    pub scales: ScaleGrid,
    /// Strictly increasing, symmetric about zero.
    pub q_grid: Vec<T>,
    pub detrend_order: usize,
    /// Inclusive `(s_min, s_max)` restriction of the scales used in the log-log fit.
    pub fit_range: Option<(usize, usize)>,
}

impl<T: Scalar> Default for MfdfaConfig<T> {
    fn default() -> Self {
        Self {
            scales: ScaleGrid::default(),
            q_grid: q_range(DEFAULT_Q_MIN, DEFAULT_Q_MAX, DEFAULT_Q_STEP)
                .expect("default q grid is valid"),
            detrend_order: DEFAULT_DETREND_ORDER,
            fit_range: None,
        }
    }
}

impl<T: Scalar> MfdfaConfig<T> {
    /// Tolerance when matching q values (grid points built from decimal steps).
    pub(crate) fn q_tolerance(&self) -> T {
        T::of(1e-6)
    }

    pub fn q_index(&self, q: T) -> Option<usize> {
        q_index(&self.q_grid, q, self.q_tolerance())
    }

    /// Checks everything that does not depend on the series length.
    pub fn validate(&self) -> Result<(), MfdfaError> {
        let q = &self.q_grid;
        if q.is_empty() {
            return Err(MfdfaError::InvalidConfig("q grid is empty".into()));
        }
        if q.iter().any(|v| !v.is_finite()) || q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MfdfaError::InvalidConfig(
                "q grid must be finite and strictly increasing".into(),
            ));
        }
        let tol = self.q_tolerance();
        if let Some(bad) = q.iter().find(|v| q_index(q, -**v, tol).is_none()) {
            return Err(MfdfaError::AsymmetricQGrid(bad.as_f64()));
        }
        if let ScaleGrid::Auto { count, .. } = self.scales {
            if count == 0 {
                return Err(MfdfaError::InvalidConfig(
                    "scale count must be positive".into(),
                ));
            }
        }
        let min_s = self.scales.min_scale();
        if min_s < self.detrend_order + 2 {
            return Err(MfdfaError::ScaleTooSmall {
                scale: min_s,
                order: self.detrend_order,
            });
        }
        if let Some((lo, hi)) = self.fit_range {
            if lo > hi {
                return Err(MfdfaError::InvalidConfig(format!(
                    "fit range ({lo}, {hi}) is inverted"
                )));
            }
        }
        Ok(())
    }

    /// Validates against a series of length `n` and returns the scale list to use.
    pub fn scales_for(&self, n: usize) -> Result<Vec<usize>, MfdfaError> {
        self.validate()?;
        let scales = self.scales.resolve(n)?;
        let Some(&smallest) = scales.first() else {
            return Err(MfdfaError::InvalidConfig("scale list is empty".into()));
        };
        if n < 4 * smallest {
            return Err(MfdfaError::TooShort {
                needed: 4 * smallest,
                found: n,
            });
        }
        for &s in &scales {
            if s < self.detrend_order + 2 {
                return Err(MfdfaError::ScaleTooSmall {
                    scale: s,
                    order: self.detrend_order,
                });
            }
            if s > n / 4 {
                return Err(MfdfaError::ScaleTooLarge { scale: s, len: n });
            }
        }
        Ok(scales)
    }
}

pub(crate) fn q_index<T: Scalar>(grid: &[T], q: T, tol: T) -> Option<usize> {
    grid.iter().position(|v| (*v - q).abs() <= tol)
}
