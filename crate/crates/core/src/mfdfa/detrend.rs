//! Segment-wise polynomial detrending of the profile.

use super::MfdfaError;
use crate::scalar::{ordered_sum, Scalar};

/// Orthonormal basis of the degree-`order` polynomials sampled at `1..=len`.
///
/// Built by twice-iterated modified Gram-Schmidt on powers of the abscissa mapped
/// to [-1, 1], which keeps the projection well conditioned at any segment length.
#[derive(Debug, Clone)]
pub struct PolyBasis<T> {
    len: usize,
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> PolyBasis<T> {
    pub fn new(len: usize, order: usize) -> Self {
        assert!(
            len > order + 1,
            "segment of {len} points cannot be fitted with order {order}"
        );
        let centre = T::of_usize(len + 1) / T::of(2.0);
        let half = T::of_usize(len - 1) / T::of(2.0);
        let t: Vec<T> = (1..=len)
            .map(|i| (T::of_usize(i) - centre) / half)
            .collect();

        let mut columns: Vec<Vec<T>> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut v: Vec<T> = t.iter().map(|x| x.powi(k as i32)).collect();
            for _ in 0..2 {
                for c in &columns {
                    let dot = dot(c, &v);
                    v.iter_mut().zip(c).for_each(|(a, b)| *a = *a - dot * *b);
                }
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|a| *a = *a / norm);
            columns.push(v);
        }
        Self { len, columns }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Mean squared residual of the least-squares polynomial fit to `segment`.
    pub fn residual_variance(&self, segment: &[T]) -> T {
        debug_assert_eq!(segment.len(), self.len);
        let mut r = segment.to_vec();
        for c in &self.columns {
            let coef = dot(c, &r);
            r.iter_mut().zip(c).for_each(|(a, b)| *a = *a - coef * *b);
        }
        ordered_sum(r.iter().map(|v| *v * *v)) / T::of_usize(self.len)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    ordered_sum(a.iter().zip(b).map(|(x, y)| *x * *y))
}

/// Start offsets (0-based) of the `2 Ns` segments: `Ns` from the start of the
/// profile, then `Ns` from its end moving backwards.
pub fn segment_starts(len: usize, scale: usize) -> Vec<usize> {
    let ns = len / scale;
    let forward = (0..ns).map(|v| v * scale);
    let backward = (1..=ns).map(|k| len - k * scale);
    forward.chain(backward).collect()
}

/// Detrended variances `F^2(v, s)` of every forward and backward segment.
pub fn segment_variances<T: Scalar>(
    profile: &[T],
    scale: usize,
    order: usize,
) -> Result<Vec<T>, MfdfaError> {
    if scale <= order + 1 {
        return Err(MfdfaError::ScaleTooSmall { scale, order });
    }
    if profile.len() / scale == 0 {
        return Err(MfdfaError::ScaleTooLarge {
            scale,
            len: profile.len(),
        });
    }
    let basis = PolyBasis::new(scale, order);
    Ok(segment_variances_with(profile, &basis))
}

pub(crate) fn segment_variances_with<T: Scalar>(profile: &[T], basis: &PolyBasis<T>) -> Vec<T> {
    let s = basis.len();
    segment_starts(profile.len(), s)
        .into_iter()
        .map(|start| basis.residual_variance(&profile[start..start + s]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Index sets straight from the 1-based segment definitions:
    /// forward `(v-1)s + i`, backward `N - (v - Ns)s + i`, `i = 1..=s`.
    fn enumerate_segments(n: usize, s: usize) -> Vec<BTreeSet<usize>> {
        let ns = n / s;
        let mut out = Vec::new();
        for v in 1..=ns {
            out.push((1..=s).map(|i| (v - 1) * s + i).collect());
        }
        for v in ns + 1..=2 * ns {
            out.push((1..=s).map(|i| n - (v - ns) * s + i).collect());
        }
        out
    }

    #[test]
    fn segment_indexing_matches_enumeration() {
        for (n, s) in [(10, 4), (8, 4), (101, 7), (64, 16), (65, 16)] {
            let expect = enumerate_segments(n, s);
            let got: Vec<BTreeSet<usize>> = segment_starts(n, s)
                .into_iter()
                .map(|st| (st + 1..=st + s).collect())
                .collect();
            assert_eq!(got, expect, "n={n} s={s}");
        }
        let e = enumerate_segments(10, 4);
        assert_eq!(e[2], (7..=10).collect());
        assert_eq!(e[3], (3..=6).collect());
    }

    #[test]
    fn exact_multiple_gives_paired_variances() {
        let y: Vec<f64> = (0..8).map(|i| ((i * i) as f64).sin() * 3.0).collect();
        let v = segment_variances(&y, 4, 1).unwrap();
        assert_eq!(v.len(), 4);
        // forward [0..4],[4..8]; backward [4..8],[0..4]
        assert_eq!(v[0], v[3]);
        assert_eq!(v[1], v[2]);
    }

    #[test]
    fn cubic_segment_is_annihilated() {
        let y: Vec<f64> = (1..=64)
            .map(|i| {
                let x = i as f64;
                2.0 - 0.5 * x + 0.03 * x * x - 0.0007 * x * x * x
            })
            .collect();
        let scale_sq = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        for s in [16, 32, 64] {
            for v in segment_variances(&y, s, 3).unwrap() {
                assert!(v <= 1e-18 * scale_sq, "s={s} v={v}");
            }
        }
    }

    #[test]
    fn variance_matches_normal_equations_linear() {
        // independent closed-form linear regression on abscissa 1..s
        let y: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64) * 0.3 - 1.0).collect();
        let basis = PolyBasis::new(20, 1);
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let mx = x.iter().sum::<f64>() / 20.0;
        let my = y.iter().sum::<f64>() / 20.0;
        let b = x
            .iter()
            .zip(&y)
            .map(|(a, c)| (a - mx) * (c - my))
            .sum::<f64>()
            / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
        let a = my - b * mx;
        let expect = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - a - b * xi).powi(2))
            .sum::<f64>()
            / 20.0;
        assert!((basis.residual_variance(&y) - expect).abs() < 1e-13 * expect);
    }

    #[test]
    fn scale_errors() {
        let y = vec![0.0; 10];
        assert!(matches!(
            segment_variances(&y, 4, 3),
            Err(MfdfaError::ScaleTooSmall { scale: 4, order: 3 })
        ));
        assert!(matches!(
            segment_variances(&y, 11, 3),
            Err(MfdfaError::ScaleTooLarge { scale: 11, len: 10 })
        ));
    }
}
