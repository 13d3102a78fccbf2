//! Rolling-window evolution of h(2), Δh(5), Δα(5) and MDM(5), event annotation and
//! period summaries.
//!
//! Windows count observations, not calendar days, and each window is labelled by the
//! date of its last observation.

use std::collections::HashSet;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mfdfa::{mfdfa_values, GheCurve, MfdfaConfig, MfdfaError, Quality};
use crate::scalar::Scalar;
use crate::spectrum::{
    delta_alpha, delta_h, mdm, singularity_spectrum, SpectrumError, DEFAULT_STRENGTH_Q,
};
use crate::transform::DerivedSeries;

/// About three years of a 7-day (crypto) calendar.
pub const CALENDAR_WINDOW: usize = 1095;
/// About three years of trading days.
pub const TRADING_WINDOW: usize = 750;

pub const HURST_Q: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RollingError {
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("step must be at least 1")]
    InvalidStep,
    #[error("period `{0}` has no overlap with the data or extends past it")]
    PeriodOutsideData(String),
    #[error("period `{name}` has {found} observations, need at least {needed}")]
    PeriodTooShort {
        name: String,
        found: usize,
        needed: usize,
    },
    #[error("duplicate event name `{0}`")]
    DuplicateEvent(String),
    #[error(transparent)]
    Mfdfa(#[from] MfdfaError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RollingConfig<T> {
    pub window: usize,
    pub step: usize,
    pub mfdfa: MfdfaConfig<T>,
}

impl<T: Scalar> RollingConfig<T> {
    pub fn calendar() -> Self {
        Self::with_window(CALENDAR_WINDOW)
    }

    pub fn trading() -> Self {
        Self::with_window(TRADING_WINDOW)
    }

    pub fn with_window(window: usize) -> Self {
        Self {
            window,
            step: 1,
            mfdfa: MfdfaConfig::default(),
        }
    }

    /// Checks the configuration against a series of length `len`.
    pub fn validate(&self, len: usize) -> Result<(), RollingError> {
        if self.step == 0 {
            return Err(RollingError::InvalidStep);
        }
        if self.window > len {
            return Err(RollingError::WindowTooLarge {
                window: self.window,
                len,
            });
        }
        self.mfdfa.scales_for(self.window)?;
        for q in [HURST_Q, DEFAULT_STRENGTH_Q, -DEFAULT_STRENGTH_Q] {
            if self.mfdfa.q_index(T::of(q)).is_none() {
                return Err(MfdfaError::QNotOnGrid(q).into());
            }
        }
        if self.mfdfa.q_grid.len() < 3 {
            return Err(SpectrumError::GridTooSmall(self.mfdfa.q_grid.len()).into());
        }
        Ok(())
    }

    pub fn window_count(&self, len: usize) -> usize {
        if self.window > len || self.step == 0 {
            0
        } else {
            (len - self.window) / self.step + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowQuality {
    Good,
    Suspect,
    /// The window could not be analysed (e.g. constant data); values are NaN.
    Failed,
}

impl RowQuality {
    pub fn label(self) -> &'static str {
        match self {
            RowQuality::Good => "good",
            RowQuality::Suspect => "suspect",
            RowQuality::Failed => "failed",
        }
    }
}

/// Summary of one curve: h(2) with its regression error and the q = 5 strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSummary<T> {
    pub h2: T,
    pub h2_err: T,
    pub dh5: T,
    pub da5: T,
    pub mdm5: T,
}

pub fn summarize<T: Scalar>(curve: &GheCurve<T>) -> Result<CurveSummary<T>, RollingError> {
    let two = T::of(HURST_Q);
    let q5 = T::of(DEFAULT_STRENGTH_Q);
    let p2 = curve.point(two).ok_or(MfdfaError::QNotOnGrid(HURST_Q))?;
    let alpha = singularity_spectrum(curve)?;
    Ok(CurveSummary {
        h2: p2.h,
        h2_err: p2.stderr,
        dh5: delta_h(curve, q5)?,
        da5: delta_alpha(&alpha, q5)?,
        mdm5: mdm(curve, q5)?.value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RollingRow<T> {
    pub end_date: NaiveDate,
    pub summary: CurveSummary<T>,
    pub quality: RowQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingResult<T> {
    pub window: usize,
    pub step: usize,
    pub rows: Vec<RollingRow<T>>,
}

impl<T: Scalar> RollingResult<T> {
    pub fn h2_path(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.summary.h2).collect()
    }
}

/// One MFDFA per window position; windows start at `0, step, 2 step, ...`.
///
/// Windows are evaluated in parallel and assembled by index, so the output does
/// not depend on the thread count.
pub fn rolling_ghe<T: Scalar>(
    series: &DerivedSeries<T>,
    config: &RollingConfig<T>,
) -> Result<RollingResult<T>, RollingError> {
    config.validate(series.len())?;
    let count = config.window_count(series.len());
    let values = series.values();
    let dates = series.dates();
    let rows = (0..count)
        .into_par_iter()
        .map(|i| {
            let start = i * config.step;
            let end = start + config.window;
            let end_date = dates[end - 1];
            let analysed = mfdfa_values(&values[start..end], &config.mfdfa)
                .map_err(RollingError::from)
                .and_then(|(curve, _)| Ok((summarize(&curve)?, curve.quality())));
            match analysed {
                Ok((summary, q)) => RollingRow {
                    end_date,
                    summary,
                    quality: match q {
                        Quality::Good => RowQuality::Good,
                        Quality::Suspect => RowQuality::Suspect,
                    },
                },
                Err(_) => RollingRow {
                    end_date,
                    summary: CurveSummary {
                        h2: T::nan(),
                        h2_err: T::nan(),
                        dh5: T::nan(),
                        da5: T::nan(),
                        mdm5: T::nan(),
                    },
                    quality: RowQuality::Failed,
                },
            }
        })
        .collect();
    Ok(RollingResult {
        window: config.window,
        step: config.step,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Period {
    pub name: String,
    /// Inclusive.
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodResult<T> {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub observations: usize,
    pub h2: T,
    pub h2_err: T,
}

/// Whole-period h(2) for each period.
pub fn period_summary<T: Scalar>(
    series: &DerivedSeries<T>,
    periods: &[Period],
    config: &MfdfaConfig<T>,
) -> Result<Vec<PeriodResult<T>>, RollingError> {
    let dates = series.dates();
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Err(RollingError::PeriodOutsideData(
            periods.first().map(|p| p.name.clone()).unwrap_or_default(),
        ));
    };
    periods
        .iter()
        .map(|p| {
            if p.start > p.end || p.start < first || p.end > last {
                return Err(RollingError::PeriodOutsideData(p.name.clone()));
            }
            let lo = dates.partition_point(|d| *d < p.start);
            let hi = dates.partition_point(|d| *d <= p.end);
            let needed = 4 * config.scales.min_scale();
            if hi - lo < needed {
                return Err(RollingError::PeriodTooShort {
                    name: p.name.clone(),
                    found: hi - lo,
                    needed,
                });
            }
            let (curve, _) = mfdfa_values(&series.values()[lo..hi], config)?;
            let p2 = curve
                .point(T::of(HURST_Q))
                .ok_or(MfdfaError::QNotOnGrid(HURST_Q))?;
            Ok(PeriodResult {
                name: p.name.clone(),
                start: p.start,
                end: p.end,
                observations: hi - lo,
                h2: p2.h,
                h2_err: p2.stderr,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub name: String,
    pub date: NaiveDate,
}

/// Named dates, kept sorted by date.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct EventSet {
    events: Vec<Event>,
}

impl EventSet {
    pub fn new(mut events: Vec<Event>) -> Result<Self, RollingError> {
        let mut seen = HashSet::new();
        for e in &events {
            if !seen.insert(e.name.clone()) {
                return Err(RollingError::DuplicateEvent(e.name.clone()));
            }
        }
        events.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.name.cmp(&b.name)));
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Lehman bankruptcy, WHO pandemic declaration and WHO end-of-pandemic declaration.
    pub fn default_events() -> Self {
        let ev = |name: &str, y, m, d| Event {
            name: name.to_string(),
            date: NaiveDate::from_ymd_opt(y, m, d).expect("valid date"),
        };
        Self::new(vec![
            ev("lehman_bankruptcy", 2008, 9, 15),
            ev("who_pandemic_declaration", 2020, 3, 11),
            ev("who_pandemic_end", 2023, 5, 5),
        ])
        .expect("default names are unique")
    }

    /// Name of the latest event on or before `date`.
    pub fn latest_before(&self, date: NaiveDate) -> Option<&str> {
        let idx = self.events.partition_point(|e| e.date <= date);
        idx.checked_sub(1).map(|i| self.events[i].name.as_str())
    }
}

/// Segment label for rows before every event.
pub const START_SEGMENT: &str = "start";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary<T> {
    pub segment: String,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub rows: usize,
    pub mean_h2: T,
    pub mean_dh5: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedRolling<T> {
    pub rows: Vec<(RollingRow<T>, String)>,
    pub segments: Vec<SegmentSummary<T>>,
}

/// Tags each row with its most recent event and averages h(2) and Δh(5) per
/// inter-event segment (failed rows are ignored in the means).
pub fn annotate_events<T: Scalar>(
    result: &RollingResult<T>,
    events: &EventSet,
) -> AnnotatedRolling<T> {
    let rows: Vec<(RollingRow<T>, String)> = result
        .rows
        .iter()
        .map(|r| {
            let seg = events.latest_before(r.end_date).unwrap_or(START_SEGMENT);
            (*r, seg.to_string())
        })
        .collect();

    let mut segments: Vec<SegmentSummary<T>> = Vec::new();
    let mut sums: Vec<(T, T, usize)> = Vec::new();
    for (row, seg) in &rows {
        if segments.last().map(|s| &s.segment) != Some(seg) {
            segments.push(SegmentSummary {
                segment: seg.clone(),
                first_date: row.end_date,
                last_date: row.end_date,
                rows: 0,
                mean_h2: T::nan(),
                mean_dh5: T::nan(),
            });
            sums.push((T::zero(), T::zero(), 0));
        }
        let s = segments.last_mut().expect("pushed above");
        let acc = sums.last_mut().expect("pushed above");
        s.last_date = row.end_date;
        s.rows += 1;
        if row.quality != RowQuality::Failed {
            acc.0 = acc.0 + row.summary.h2;
            acc.1 = acc.1 + row.summary.dh5;
            acc.2 += 1;
        }
    }
    for (s, (h2, dh5, n)) in segments.iter_mut().zip(sums) {
        if n > 0 {
            s.mean_h2 = h2 / T::of_usize(n);
            s.mean_dh5 = dh5 / T::of_usize(n);
        }
    }
    AnnotatedRolling { rows, segments }
}
