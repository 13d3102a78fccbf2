//! Singularity spectrum and multifractal strength measures derived from `h(q)`.

use serde::Serialize;
use thiserror::Error;

use crate::mfdfa::GheCurve;
use crate::scalar::Scalar;

/// Default order for the strength measures Δh, Δα and MDM.
pub const DEFAULT_STRENGTH_Q: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("need at least 3 grid points, found {0}")]
    GridTooSmall(usize),
    #[error("q grid is not uniformly spaced")]
    NonUniformGrid,
    #[error("q = {0} (or its negative) is not on the grid")]
    QNotOnGrid(f64),
    #[error("strength is undefined at q = 0")]
    QZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaPoint<T> {
    pub q: T,
    pub alpha: T,
    pub f: T,
    /// Derivative taken from a one-sided stencil at a grid end (lower quality).
    pub one_sided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaCurve<T> {
    pub points: Vec<AlphaPoint<T>>,
}

impl<T: Scalar> AlphaCurve<T> {
    pub fn alpha(&self, q: T) -> Option<T> {
        let tol = T::of(1e-6);
        self.points
            .iter()
            .find(|p| (p.q - q).abs() <= tol)
            .map(|p| p.alpha)
    }
}

/// `alpha = h + q h'(q)`, `f = q (alpha - h) + 1`.
///
/// `h'` uses central differences with the grid step; the two end points use the
/// second-order one-sided stencil and are flagged `one_sided`.
pub fn singularity_spectrum<T: Scalar>(
    curve: &GheCurve<T>,
) -> Result<AlphaCurve<T>, SpectrumError> {
    let pts = curve.points();
    let n = pts.len();
    if n < 3 {
        return Err(SpectrumError::GridTooSmall(n));
    }
    let step = pts[1].q - pts[0].q;
    let tol = T::of(1e-6) * step.abs();
    if !(step > T::zero())
        || pts
            .windows(2)
            .any(|w| ((w[1].q - w[0].q) - step).abs() > tol)
    {
        return Err(SpectrumError::NonUniformGrid);
    }
    let two = T::of(2.0);
    let three = T::of(3.0);
    let four = T::of(4.0);
    let points = (0..n)
        .map(|i| {
            let (dh, one_sided) = if i == 0 {
                (
                    (-three * pts[0].h + four * pts[1].h - pts[2].h) / (two * step),
                    true,
                )
            } else if i == n - 1 {
                (
                    (three * pts[n - 1].h - four * pts[n - 2].h + pts[n - 3].h) / (two * step),
                    true,
                )
            } else {
                ((pts[i + 1].h - pts[i - 1].h) / (two * step), false)
            };
            let q = pts[i].q;
            let alpha = pts[i].h + q * dh;
            AlphaPoint {
                q,
                alpha,
                f: q * (alpha - pts[i].h) + T::one(),
                one_sided,
            }
        })
        .collect();
    Ok(AlphaCurve { points })
}

fn h_pair<T: Scalar>(curve: &GheCurve<T>, q: T) -> Result<(T, T), SpectrumError> {
    let missing = || SpectrumError::QNotOnGrid(q.as_f64());
    Ok((
        curve.h(-q).ok_or_else(missing)?,
        curve.h(q).ok_or_else(missing)?,
    ))
}

/// `Δh(q) = h(-q) - h(q)`; negative values are legitimate.
pub fn delta_h<T: Scalar>(curve: &GheCurve<T>, q: T) -> Result<T, SpectrumError> {
    if q == T::zero() {
        return Err(SpectrumError::QZero);
    }
    let (neg, pos) = h_pair(curve, q)?;
    Ok(neg - pos)
}

/// `Δα(q) = α(-q) - α(q)`.
pub fn delta_alpha<T: Scalar>(alpha: &AlphaCurve<T>, q: T) -> Result<T, SpectrumError> {
    let missing = || SpectrumError::QNotOnGrid(q.as_f64());
    Ok(alpha.alpha(-q).ok_or_else(missing)? - alpha.alpha(q).ok_or_else(missing)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mdm<T> {
    pub value: T,
    /// `h(-q) > 0.5 > h(q)`, in which case `value == Δh(q) / 2`.
    pub reduces_to_half_delta_h: bool,
}

/// Market deficiency measure `(|h(-q) - 0.5| + |0.5 - h(q)|) / 2`.
pub fn mdm<T: Scalar>(curve: &GheCurve<T>, q: T) -> Result<Mdm<T>, SpectrumError> {
    let (neg, pos) = h_pair(curve, q)?;
    let half = T::of(0.5);
    let reduces = neg > half && half > pos;
    let value = if reduces {
        // both absolute values open with a plus sign and the 0.5 terms cancel
        (neg - pos) * half
    } else {
        ((neg - half).abs() + (half - pos).abs()) * half
    };
    Ok(Mdm {
        value,
        reduces_to_half_delta_h: reduces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrengthRow<T> {
    pub q: T,
    pub delta_h: T,
    pub delta_alpha: T,
    pub mdm: T,
}

/// Δh, Δα and MDM for every positive q on the grid.
pub fn strengths<T: Scalar>(
    curve: &GheCurve<T>,
    alpha: &AlphaCurve<T>,
) -> Result<Vec<StrengthRow<T>>, SpectrumError> {
    curve
        .points()
        .iter()
        .filter(|p| p.q > T::zero())
        .map(|p| {
            Ok(StrengthRow {
                q: p.q,
                delta_h: delta_h(curve, p.q)?,
                delta_alpha: delta_alpha(alpha, p.q)?,
                mdm: mdm(curve, p.q)?.value,
            })
        })
        .collect()
}
