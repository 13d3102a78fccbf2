//! CSV formats read and written by the CLI and the pipeline.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value read
//! back is bit-identical. Lines starting with `#` are comments and are skipped on input.

use std::io::{Read, Write};

use chrono::NaiveDate;
use thiserror::Error;

use crate::hurstscale::ScalingFit;
use crate::ingest::{parse_date, ISO_DATE};
use crate::mfdfa::{FluctuationSurface, GheCurve, GhePoint};
use crate::rolling::{AnnotatedRolling, Event, EventSet, PeriodResult, RollingError};
use crate::scalar::Scalar;
use crate::spectrum::{AlphaCurve, StrengthRow};
use crate::transform::{DerivedSeries, SeriesKind, StatsReport, TransformError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("column `{0}` not present in header")]
    MissingColumn(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Events(#[from] RollingError),
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

/// Reads named columns from every record, handing each row's fields to `f`.
fn read_rows<R: Read, F>(r: R, columns: &[&str], mut f: F) -> Result<(), FormatError>
where
    F: FnMut(u64, &[&str]) -> Result<(), String>,
{
    let mut rdr = reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| FormatError::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let idx = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(c))
                .ok_or_else(|| FormatError::MissingColumn(c.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FormatError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = idx.iter().map(|&i| rec.get(i).unwrap_or("")).collect();
        f(line, &fields).map_err(|reason| FormatError::Parse { line, reason })?;
    }
    Ok(())
}

fn num<T: Scalar>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("not a number: `{s}`"))
}

fn date(s: &str) -> Result<NaiveDate, String> {
    parse_date(s, None).ok_or_else(|| format!("not an ISO date: `{s}`"))
}

/// `date,value`, optionally preceded by `# ` comment lines.
pub fn write_series_csv<T: Scalar, W: Write>(
    series: &DerivedSeries<T>,
    comments: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "date,value")?;
    for (d, v) in series.dates().iter().zip(series.values()) {
        writeln!(out, "{},{}", d.format(ISO_DATE), v)?;
    }
    Ok(())
}

pub fn read_series_csv<T: Scalar, R: Read>(
    r: R,
    kind: SeriesKind,
    source: &str,
) -> Result<DerivedSeries<T>, FormatError> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    read_rows(r, &["date", "value"], |_, f| {
        dates.push(date(f[0])?);
        values.push(num(f[1])?);
        Ok(())
    })?;
    Ok(DerivedSeries::new(kind, source, dates, values)?)
}

pub fn write_ghe_csv<T: Scalar, W: Write>(curve: &GheCurve<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "q,h,stderr,r2")?;
    for p in curve.points() {
        writeln!(out, "{},{},{},{}", p.q, p.h, p.stderr, p.r2)?;
    }
    Ok(())
}

pub fn read_ghe_csv<T: Scalar, R: Read>(r: R) -> Result<GheCurve<T>, FormatError> {
    let mut points: Vec<GhePoint<T>> = Vec::new();
    read_rows(r, &["q", "h", "stderr", "r2"], |_, f| {
        points.push(GhePoint {
            q: num(f[0])?,
            h: num(f[1])?,
            stderr: num(f[2])?,
            r2: num(f[3])?,
        });
        Ok(())
    })?;
    points.sort_by(|a, b| a.q.partial_cmp(&b.q).unwrap_or(std::cmp::Ordering::Equal));
    Ok(GheCurve::from_points(points))
}

/// Long form `q,s,F`.
pub fn write_fluctuation_csv<T: Scalar, W: Write>(
    surface: &FluctuationSurface<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "q,s,F")?;
    for (qi, q) in surface.q_grid().iter().enumerate() {
        for (si, s) in surface.scales().iter().enumerate() {
            writeln!(out, "{},{},{}", q, s, surface.value(qi, si))?;
        }
    }
    Ok(())
}

/// `q,alpha,f,quality` where quality is `central` or `one_sided`.
pub fn write_alpha_csv<T: Scalar, W: Write>(
    alpha: &AlphaCurve<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "q,alpha,f,quality")?;
    for p in &alpha.points {
        let quality = if p.one_sided { "one_sided" } else { "central" };
        writeln!(out, "{},{},{},{}", p.q, p.alpha, p.f, quality)?;
    }
    Ok(())
}

pub fn write_strength_csv<T: Scalar, W: Write>(
    rows: &[StrengthRow<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "q,delta_h,delta_alpha,mdm")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.q, r.delta_h, r.delta_alpha, r.mdm)?;
    }
    Ok(())
}

/// `end_date,h2,h2_err,dh5,da5,mdm5,quality,segment`.
pub fn write_rolling_csv<T: Scalar, W: Write>(
    annotated: &AnnotatedRolling<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "end_date,h2,h2_err,dh5,da5,mdm5,quality,segment")?;
    for (row, seg) in &annotated.rows {
        let s = &row.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.end_date.format(ISO_DATE),
            s.h2,
            s.h2_err,
            s.dh5,
            s.da5,
            s.mdm5,
            row.quality.label(),
            seg
        )?;
    }
    Ok(())
}

pub fn write_segments_csv<T: Scalar, W: Write>(
    annotated: &AnnotatedRolling<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "segment,first_date,last_date,rows,mean_h2,mean_dh5")?;
    for s in &annotated.segments {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.segment,
            s.first_date.format(ISO_DATE),
            s.last_date.format(ISO_DATE),
            s.rows,
            s.mean_h2,
            s.mean_dh5
        )?;
    }
    Ok(())
}

/// One row per (series, statistic); undefined statistics are written as `NaN`.
pub fn write_stats_csv<T: Scalar, W: Write>(
    reports: &[(SeriesKind, StatsReport<T>)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "series,statistic,value,error,n,blocks")?;
    for (kind, r) in reports {
        let rows = [
            ("mean", Some(r.mean)),
            ("variance", Some(r.variance)),
            ("kurtosis", r.kurtosis),
            ("skewness", r.skewness),
        ];
        for (name, est) in rows {
            let (v, e) = est.map_or((T::nan(), T::nan()), |e| (e.value, e.error));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                kind.label(),
                name,
                v,
                e,
                r.n,
                r.block_count
            )?;
        }
    }
    Ok(())
}

pub fn write_period_csv<T: Scalar, W: Write>(
    rows: &[PeriodResult<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "period,start,end,observations,h2,h2_err")?;
    for p in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.name,
            p.start.format(ISO_DATE),
            p.end.format(ISO_DATE),
            p.observations,
            p.h2,
            p.h2_err
        )?;
    }
    Ok(())
}

/// `name,date`.
pub fn read_events_csv<R: Read>(r: R) -> Result<EventSet, FormatError> {
    let mut events = Vec::new();
    read_rows(r, &["name", "date"], |_, f| {
        if f[0].is_empty() {
            return Err("empty event name".into());
        }
        events.push(Event {
            name: f[0].to_string(),
            date: date(f[1])?,
        });
        Ok(())
    })?;
    Ok(EventSet::new(events)?)
}

/// `n,h2` sample points for the finite-sample fit.
pub fn read_points_csv<T: Scalar, R: Read>(r: R) -> Result<Vec<(usize, T)>, FormatError> {
    let mut points = Vec::new();
    read_rows(r, &["n", "h2"], |_, f| {
        let n = f[0]
            .parse()
            .map_err(|_| format!("not a sample size: `{}`", f[0]))?;
        points.push((n, num(f[1])?));
        Ok(())
    })?;
    Ok(points)
}

pub fn write_scaling_fit_csv<T: Scalar, W: Write>(
    fit: &ScalingFit<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "h2_inf,a1,residual_norm,iterations")?;
    writeln!(
        out,
        "{},{},{},{}",
        fit.h2_inf, fit.a1, fit.residual_norm, fit.iterations
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfdfa::q_range;
    use proptest::prelude::*;

    #[test]
    fn events_csv() {
        let ev = read_events_csv("name,date\nb,2021-01-01\na,2020-01-01\n".as_bytes()).unwrap();
        assert_eq!(ev.events()[0].name, "a");
        assert!(read_events_csv("name,date\na,2020-01-01\na,2021-01-01\n".as_bytes()).is_err());
        assert!(matches!(
            read_events_csv("name,when\n".as_bytes()),
            Err(FormatError::MissingColumn(c)) if c == "date"
        ));
    }

    #[test]
    fn points_csv() {
        let p: Vec<(usize, f64)> = read_points_csv("n,h2\n1,0.03\n4,0.07\n".as_bytes()).unwrap();
        assert_eq!(p, vec![(1, 0.03), (4, 0.07)]);
        assert!(matches!(
            read_points_csv::<f64, _>("n,h2\nx,0.1\n".as_bytes()),
            Err(FormatError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn series_comments_skipped() {
        let text = "# generated\ndate,value\n2000-01-01,1.5\n2000-01-02,-2\n";
        let s: DerivedSeries<f64> = read_series_csv(text.as_bytes(), SeriesKind::Raw, "x").unwrap();
        assert_eq!(s.values(), &[1.5, -2.0]);
        let mut out = Vec::new();
        write_series_csv(&s, &["generated".to_string()], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn stats_undefined_written_as_nan() {
        let s = DerivedSeries::from_values("c", crate::synth::synthetic_epoch(), vec![1.0f64; 10])
            .unwrap();
        let r = crate::transform::descriptive_stats(&s, 2).unwrap();
        let mut out = Vec::new();
        write_stats_csv(&[(SeriesKind::Raw, r)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("raw,kurtosis,NaN,NaN,10,2"), "{text}");
        assert!(text.contains("raw,variance,0,0,10,2"), "{text}");
    }

    proptest! {
        #[test]
        fn ghe_csv_round_trips_bitwise(hs in prop::collection::vec(-1.0f64..2.0, 9)) {
            let q = q_range::<f64>(-2.0, 2.0, 0.5).unwrap();
            let curve = GheCurve::from_points(q.iter().zip(&hs).map(|(&q, &h)| GhePoint {
                q, h, stderr: h.abs() / 7.0, r2: 0.9,
            }).collect());
            let mut buf = Vec::new();
            write_ghe_csv(&curve, &mut buf).unwrap();
            let back: GheCurve<f64> = read_ghe_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.points(), curve.points());
        }
    }
}
