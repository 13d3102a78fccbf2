//! Daily price ingestion: CSV loading, validation and the canonical `date,close` format.
//!
//! Consecutive observations are treated as adjacent. No calendar resampling or gap
//! filling is done, so trading-day series stay on trading days and 7-day crypto
//! series stay on calendar days.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub const ISO_DATE: &str = "%Y-%m-%d";

/// Gaps (in calendar days) longer than this are listed in a [`CoverageReport`].
/// Five days clears ordinary weekends and long holiday weekends.
pub const LONG_GAP_DAYS: i64 = 5;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("column `{0}` not present in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {reason}")]
    Parse {
        row: u64,
        column: String,
        reason: String,
    },
    #[error("series has no observations")]
    EmptySeries,
    #[error("series needs at least 2 observations, found {0}")]
    TooShort(usize),
    #[error("row {row}: close must be strictly positive")]
    NonPositivePrice { row: u64 },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: u64, date: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub date: NaiveDate,
    pub close: T,
}

/// Date-indexed strictly positive daily closes for one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    instrument: String,
    observations: Vec<Observation<T>>,
}

impl<T: Scalar> PriceSeries<T> {
    /// Validates the invariants: length >= 2, strictly increasing dates, finite positive closes.
    /// Row numbers in errors are 1-based positions in `observations`.
    pub fn new(
        instrument: impl Into<String>,
        observations: Vec<Observation<T>>,
    ) -> Result<Self, IngestError> {
        match observations.len() {
            0 => return Err(IngestError::EmptySeries),
            1 => return Err(IngestError::TooShort(1)),
            _ => {}
        }
        for (i, obs) in observations.iter().enumerate() {
            let row = i as u64 + 1;
            if !(obs.close.is_finite() && obs.close > T::zero()) {
                return Err(IngestError::NonPositivePrice { row });
            }
            if i > 0 && observations[i - 1].date >= obs.date {
                return Err(IngestError::DuplicateDate {
                    row,
                    date: obs.date,
                });
            }
        }
        Ok(Self {
            instrument: instrument.into(),
            observations,
        })
    }

    pub fn instrument(&self) -> &str {
        &self.instrument
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|o| o.date)
    }

    pub fn closes(&self) -> impl Iterator<Item = T> + '_ {
        self.observations.iter().map(|o| o.close)
    }
}

/// How to find the date and close columns in an input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSpec {
    pub date_col: String,
    pub price_col: String,
    /// chrono format string; ISO-8601 when absent.
    pub date_format: Option<String>,
    /// Drop rows with a missing, unparseable or non-positive close instead of failing.
    pub skip_bad_rows: bool,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            date_col: "date".into(),
            price_col: "close".into(),
            date_format: None,
            skip_bad_rows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub skipped: Vec<SkippedRow>,
    /// True when the input was not date-sorted and had to be reordered.
    pub reordered: bool,
}

pub fn load_price_csv<T: Scalar>(
    path: &Path,
    spec: &ColumnSpec,
) -> Result<(PriceSeries<T>, LoadReport), IngestError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let instrument = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_price_csv(file, &instrument, spec)
}

/// Reader-based variant of [`load_price_csv`]. Row numbers in errors and reports are
/// 1-based line numbers of the input, header included.
pub fn read_price_csv<T: Scalar, R: Read>(
    reader: R,
    instrument: &str,
    spec: &ColumnSpec,
) -> Result<(PriceSeries<T>, LoadReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let date_idx = find(&spec.date_col)?;
    let price_idx = find(&spec.price_col)?;

    let mut report = LoadReport::default();
    let mut rows: Vec<(u64, Observation<T>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(0, |p| p.line());
        report.rows_read += 1;

        let raw_date = record.get(date_idx).unwrap_or("");
        let date = parse_date(raw_date, spec.date_format.as_deref()).ok_or_else(|| {
            IngestError::Parse {
                row,
                column: spec.date_col.clone(),
                reason: format!("unparseable date `{raw_date}`"),
            }
        })?;

        let raw_close = record.get(price_idx).unwrap_or("");
        let close = match check_close::<T>(raw_close) {
            Ok(c) => c,
            Err(reason) if spec.skip_bad_rows => {
                report.skipped.push(SkippedRow { row, reason });
                continue;
            }
            Err(reason) => {
                return Err(if reason == NON_POSITIVE {
                    IngestError::NonPositivePrice { row }
                } else {
                    IngestError::Parse {
                        row,
                        column: spec.price_col.clone(),
                        reason,
                    }
                });
            }
        };
        rows.push((row, Observation { date, close }));
    }

    if rows.windows(2).any(|w| w[0].1.date > w[1].1.date) {
        rows.sort_by_key(|(_, o)| o.date);
        report.reordered = true;
    }
    for w in rows.windows(2) {
        if w[0].1.date == w[1].1.date {
            return Err(IngestError::DuplicateDate {
                row: w[1].0,
                date: w[1].1.date,
            });
        }
    }
    let observations = rows.into_iter().map(|(_, o)| o).collect();
    let series = PriceSeries::new(instrument, observations)?;
    Ok((series, report))
}

const NON_POSITIVE: &str = "non-positive close";

fn check_close<T: Scalar>(raw: &str) -> Result<T, String> {
    if raw.is_empty() {
        return Err("missing close".into());
    }
    let v: T = raw
        .parse()
        .map_err(|_| format!("unparseable close `{raw}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite close `{raw}`"));
    }
    if v <= T::zero() {
        return Err(NON_POSITIVE.into());
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> IngestError {
    let row = e.position().map_or(0, |p| p.line());
    IngestError::Parse {
        row,
        column: String::new(),
        reason: e.to_string(),
    }
}

/// Parses a date with an explicit chrono format, or ISO-8601 (date or date-time) otherwise.
pub fn parse_date(raw: &str, format: Option<&str>) -> Option<NaiveDate> {
    match format {
        Some(fmt) => NaiveDate::parse_from_str(raw, fmt).ok().or_else(|| {
            NaiveDateTime::parse_from_str(raw, fmt)
                .ok()
                .map(|t| t.date())
        }),
        None => NaiveDate::parse_from_str(raw, ISO_DATE).ok().or_else(|| {
            chrono::DateTime::parse_from_rfc3339(raw)
                .map(|t| t.date_naive())
                .ok()
                .or_else(|| {
                    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
                        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
                        .map(|t| t.date())
                        .ok()
                })
        }),
    }
}

/// Writes the canonical format: header `date,close`, ISO dates, shortest round-trip decimals.
pub fn write_price_csv<T: Scalar, W: Write>(
    series: &PriceSeries<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "date,close")?;
    for o in series.observations() {
        writeln!(out, "{},{}", o.date.format(ISO_DATE), o.close)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageStatus {
    Covered,
    TruncatedHead,
    TruncatedTail,
    TruncatedBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub days: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub first: NaiveDate,
    pub last: NaiveDate,
    pub count: usize,
    pub largest_gap: Gap,
    /// Every gap longer than [`LONG_GAP_DAYS`].
    pub long_gaps: Vec<Gap>,
    pub status: CoverageStatus,
}

/// Checks that `series` spans `[expected_start, expected_end]`.
///
/// Panics if `expected_start >= expected_end`.
pub fn validate_span<T: Scalar>(
    series: &PriceSeries<T>,
    expected_start: NaiveDate,
    expected_end: NaiveDate,
) -> CoverageReport {
    assert!(
        expected_start < expected_end,
        "expected_start must precede expected_end"
    );
    let obs = series.observations();
    let first = obs[0].date;
    let last = obs[obs.len() - 1].date;
    let gaps: Vec<Gap> = obs
        .windows(2)
        .map(|w| Gap {
            from: w[0].date,
            to: w[1].date,
            days: (w[1].date - w[0].date).num_days(),
        })
        .collect();
    // first maximal gap wins ties
    let largest_gap = gaps
        .iter()
        .copied()
        .fold(gaps[0], |best, g| if g.days > best.days { g } else { best });
    let long_gaps = gaps
        .into_iter()
        .filter(|g| g.days > LONG_GAP_DAYS)
        .collect();
    let status = match (first > expected_start, last < expected_end) {
        (false, false) => CoverageStatus::Covered,
        (true, false) => CoverageStatus::TruncatedHead,
        (false, true) => CoverageStatus::TruncatedTail,
        (true, true) => CoverageStatus::TruncatedBoth,
    };
    CoverageReport {
        first,
        last,
        count: obs.len(),
        largest_gap,
        long_gaps,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, ISO_DATE).unwrap()
    }

    fn load(text: &str, spec: &ColumnSpec) -> Result<(PriceSeries<f64>, LoadReport), IngestError> {
        read_price_csv(text.as_bytes(), "test", spec)
    }

    #[test]
    fn two_rows_load() {
        let (s, r) = load(
            "date,close\n2020-01-01,100\n2020-01-02,101\n",
            &ColumnSpec::default(),
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(r.rows_read, 2);
        assert!(!r.reordered);
        assert_eq!(s.observations()[1].close, 101.0);
    }

    #[test]
    fn duplicate_date_rejected() {
        let err = load(
            "date,close\n2020-01-01,100\n2020-01-02,101\n2020-01-02,102\n",
            &ColumnSpec::default(),
        )
        .unwrap_err();
        assert!(
            matches!(err, IngestError::DuplicateDate { row: 4, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn zero_close_fails_without_skip() {
        let err = load(
            "date,close\n2020-01-01,100\n2020-01-02,0\n2020-01-03,101\n",
            &ColumnSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::NonPositivePrice { row: 3 }));
    }

    #[test]
    fn zero_close_skipped_with_flag() {
        let spec = ColumnSpec {
            skip_bad_rows: true,
            ..Default::default()
        };
        let (s, r) = load(
            "date,close\n2020-01-01,100\n2020-01-02,0\n2020-01-03,101\n",
            &spec,
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].row, 3);
    }

    #[test]
    fn missing_close_is_parse_error() {
        let err = load(
            "date,close\n2020-01-01,100\n2020-01-02,\n",
            &ColumnSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Parse { row: 3, .. }));
    }

    #[test]
    fn custom_columns_and_format() {
        let spec = ColumnSpec {
            date_col: "Date".into(),
            price_col: "Price".into(),
            date_format: Some("%m/%d/%Y".into()),
            skip_bad_rows: false,
        };
        let (s, r) = load(
            "Date,Open,Price\n01/03/2020,1,10.5\n01/02/2020,1,10\n",
            &spec,
        )
        .unwrap();
        assert!(r.reordered);
        assert_eq!(s.observations()[0].date, d("2020-01-02"));
        assert_eq!(s.observations()[1].close, 10.5);
    }

    #[test]
    fn missing_column_reported() {
        let err = load("day,close\n2020-01-01,1\n", &ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "date"));
    }

    #[test]
    fn empty_and_single_row() {
        assert!(matches!(
            load("date,close\n", &ColumnSpec::default()).unwrap_err(),
            IngestError::EmptySeries
        ));
        assert!(matches!(
            load("date,close\n2020-01-01,1\n", &ColumnSpec::default()).unwrap_err(),
            IngestError::TooShort(1)
        ));
    }

    #[test]
    fn missing_file() {
        let err =
            load_price_csv::<f64>(Path::new("/nonexistent/prices.csv"), &ColumnSpec::default())
                .unwrap_err();
        assert!(matches!(err, IngestError::FileNotFound(_)));
    }

    #[test]
    fn iso_datetimes_accepted() {
        assert_eq!(
            parse_date("2020-03-11T00:00:00Z", None),
            Some(d("2020-03-11"))
        );
        assert_eq!(
            parse_date("2020-03-11 16:00:00", None),
            Some(d("2020-03-11"))
        );
        assert_eq!(parse_date("11.03.2020", None), None);
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let input = "date,close\n2020-01-01,100.25\n2020-01-02,0.1\n2020-01-05,123456.789012345\n";
        let (s, _) = load(input, &ColumnSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_price_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), input);
        let (s2, _) = load(std::str::from_utf8(&buf).unwrap(), &ColumnSpec::default()).unwrap();
        let mut buf2 = Vec::new();
        write_price_csv(&s2, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    fn daily(start: &str, days: i64) -> PriceSeries<f64> {
        let s = d(start);
        let obs = (0..days)
            .map(|i| Observation {
                date: s + chrono::Duration::days(i),
                close: 100.0,
            })
            .collect();
        PriceSeries::new("x", obs).unwrap()
    }

    #[test]
    fn span_covered_and_truncated() {
        let s = daily("2016-03-11", 3218); // through 2024-12-31
        assert_eq!(s.observations().last().unwrap().date, d("2024-12-31"));
        let r = validate_span(&s, d("2016-03-11"), d("2024-12-31"));
        assert_eq!(r.status, CoverageStatus::Covered);
        assert_eq!(r.count, 3218);
        assert_eq!(r.largest_gap.days, 1);
        assert!(r.long_gaps.is_empty());

        let r = validate_span(&s, d("2016-01-01"), d("2024-12-31"));
        assert_eq!(r.status, CoverageStatus::TruncatedHead);
        let r = validate_span(&s, d("2016-01-01"), d("2025-06-30"));
        assert_eq!(r.status, CoverageStatus::TruncatedBoth);
    }

    #[test]
    fn span_reports_long_gaps() {
        let obs = ["2020-01-01", "2020-01-02", "2020-01-20", "2020-01-21"]
            .iter()
            .map(|s| Observation {
                date: d(s),
                close: 1.0,
            })
            .collect();
        let s = PriceSeries::new("x", obs).unwrap();
        let r = validate_span(&s, d("2020-01-01"), d("2020-01-21"));
        assert_eq!(r.status, CoverageStatus::Covered);
        assert_eq!(r.largest_gap.days, 18);
        assert_eq!(r.long_gaps.len(), 1);
    }
}
