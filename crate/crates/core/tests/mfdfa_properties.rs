//! Estimator-level properties of MFDFA checked against independent oracles.

use approx::assert_relative_eq;
use proptest::prelude::*;

use mfhurst::mfdfa::{
    mfdfa_values, profile, q_range, segment_variances, FluctuationSurface, MfdfaConfig, ScaleGrid,
};
use mfhurst::synth::{fgn, gaussian_noise};
use mfhurst::{GheCurve, MfdfaConfigF32};

fn noise(n: usize, seed: u64) -> Vec<f64> {
    gaussian_noise::<f64>(n, seed).unwrap().values().to_vec()
}

fn run(values: &[f64], cfg: &MfdfaConfig<f64>) -> (GheCurve<f64>, FluctuationSurface<f64>) {
    mfdfa_values(values, cfg).unwrap()
}

fn max_h_gap(a: &GheCurve<f64>, b: &GheCurve<f64>) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(x, y)| (x.h - y.h).abs())
        .fold(0.0, f64::max)
}

/// Straight cumulative sum of mean-removed values.
fn cumsum_oracle(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut acc = 0.0;
    x.iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect()
}

/// Plain DFA-1 at q = 2: closed-form straight-line fit per segment, forward and
/// backward segmentation, root of the mean detrended variance.
fn dfa1_oracle(x: &[f64], s: usize) -> f64 {
    let y = cumsum_oracle(x);
    let n = y.len();
    let ns = n / s;
    let mut starts: Vec<usize> = (0..ns).map(|v| v * s).collect();
    starts.extend((1..=ns).map(|k| n - k * s));
    let t_mean = (s as f64 + 1.0) / 2.0;
    let stt: f64 = (1..=s).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let total: f64 = starts
        .iter()
        .map(|&a| {
            let seg = &y[a..a + s];
            let y_mean = seg.iter().sum::<f64>() / s as f64;
            let sty: f64 = seg
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0 - t_mean) * (v - y_mean))
                .sum();
            let slope = sty / stt;
            seg.iter()
                .enumerate()
                .map(|(i, v)| {
                    let fit = y_mean + slope * (i as f64 + 1.0 - t_mean);
                    (v - fit).powi(2)
                })
                .sum::<f64>()
                / s as f64
        })
        .sum();
    (total / starts.len() as f64).sqrt()
}

#[test]
fn profile_matches_cumulative_sum_oracle() {
    let x = noise(1000, 5);
    let y = profile(&x).unwrap();
    let oracle = cumsum_oracle(&x);
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in y.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
    }
    assert!(y.last().unwrap().abs() <= 1e-10 * 1000.0 * 4.0);
}

#[test]
fn plain_dfa_oracle_at_q2_order1() {
    let x = noise(600, 17);
    let scales = vec![10, 16, 23, 37, 50, 75, 100, 150];
    let cfg = MfdfaConfig {
        scales: ScaleGrid::Explicit(scales.clone()),
        q_grid: q_range(-2.0, 2.0, 1.0).unwrap(),
        detrend_order: 1,
        fit_range: None,
    };
    let (curve, surface) = run(&x, &cfg);
    let qi = cfg.q_index(2.0).unwrap();
    let mut ln_s = Vec::new();
    let mut ln_f = Vec::new();
    for (si, &s) in scales.iter().enumerate() {
        let oracle = dfa1_oracle(&x, s);
        assert_relative_eq!(surface.value(qi, si), oracle, max_relative = 1e-10);
        ln_s.push((s as f64).ln());
        ln_f.push(oracle.ln());
    }
    let k = ln_s.len() as f64;
    let (mx, my) = (ln_s.iter().sum::<f64>() / k, ln_f.iter().sum::<f64>() / k);
    let sxy: f64 = ln_s
        .iter()
        .zip(&ln_f)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let sxx: f64 = ln_s.iter().map(|a| (a - mx).powi(2)).sum();
    assert_relative_eq!(curve.h(2.0).unwrap(), sxy / sxx, max_relative = 1e-10);
}

#[test]
fn positive_rescaling_leaves_h_unchanged_and_scales_f() {
    let x = noise(3000, 1);
    let cfg = MfdfaConfig::default();
    let (base, base_surface) = run(&x, &cfg);
    for c in [0.001, 0.5, 2.0, 3.7, 1e4] {
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (curve, surface) = run(&scaled, &cfg);
        assert!(max_h_gap(&base, &curve) <= 1e-12, "c = {c}");
        for qi in 0..cfg.q_grid.len() {
            for si in 0..surface.scales().len() {
                assert_relative_eq!(
                    surface.value(qi, si),
                    c * base_surface.value(qi, si),
                    max_relative = 1e-12
                );
            }
        }
    }
}

#[test]
fn adding_a_constant_changes_nothing() {
    let x = noise(3000, 2);
    let cfg = MfdfaConfig::default();
    let (base, base_surface) = run(&x, &cfg);
    for shift in [-50.0, 1e-3, 1234.5] {
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let (curve, surface) = run(&shifted, &cfg);
        assert!(max_h_gap(&base, &curve) <= 1e-10, "shift {shift}");
        for qi in 0..cfg.q_grid.len() {
            for si in 0..surface.scales().len() {
                assert_relative_eq!(
                    surface.value(qi, si),
                    base_surface.value(qi, si),
                    max_relative = 1e-9
                );
            }
        }
    }
}

#[test]
fn reversed_profile_gives_the_same_variance_sets() {
    let y = profile(&noise(1003, 9)).unwrap();
    let mut reversed = y.clone();
    reversed.reverse();
    for s in [16, 25, 64, 100, 250] {
        let mut a = segment_variances(&y, s, 3).unwrap();
        let mut b = segment_variances(&reversed, s, 3).unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, max_relative = 1e-10);
        }
    }
}

#[test]
fn reversed_series_gives_nearly_the_same_curve() {
    // Reversing the increments reverses the profile with a one-sample shift, so
    // segment boundaries move by one and only approximate agreement is expected.
    let x = noise(4000, 3);
    let mut rev = x.clone();
    rev.reverse();
    let cfg = MfdfaConfig::default();
    assert!(max_h_gap(&run(&x, &cfg).0, &run(&rev, &cfg).0) < 0.01);
}

#[test]
fn thread_count_does_not_change_results() {
    let x = fgn::<f64>(5000, 0.65, 4).unwrap().values().to_vec();
    let cfg = MfdfaConfig::default();
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&x, &cfg))
    };
    let (c1, s1) = in_pool(1);
    let (c7, s7) = in_pool(7);
    assert_eq!(c1, c7);
    assert_eq!(s1, s7);
}

#[test]
fn single_precision_path_agrees_with_double() {
    let x64 = noise(8000, 12);
    let x32: Vec<f32> = x64.iter().map(|v| *v as f32).collect();
    let (c32, _) = mfdfa_values(&x32, &MfdfaConfigF32::default()).unwrap();
    let (c64, _) = run(&x64, &MfdfaConfig::default());
    for (a, b) in c32.points().iter().zip(c64.points()) {
        assert!((f64::from(a.h) - b.h).abs() < 1e-3, "q = {}", b.q);
    }
}

#[test]
fn short_series_is_rejected() {
    let x = noise(64, 0);
    assert!(mfdfa_values(&x[..63], &MfdfaConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fluctuation_is_non_decreasing_in_q(seed in 0u64..10_000, n in 256usize..1500) {
        let x = noise(n, seed);
        let (curve, surface) = run(&x, &MfdfaConfig::default());
        prop_assert_eq!(surface.order_violations(), 0);
        prop_assert_eq!(curve.diagnostics().fq_order_violations, 0);
    }

    #[test]
    fn estimates_are_finite_with_bounded_fit_errors(seed in 0u64..10_000) {
        let x = noise(1024, seed);
        let (curve, _) = run(&x, &MfdfaConfig::default());
        for p in curve.points() {
            prop_assert!(p.h.is_finite() && p.stderr.is_finite());
            prop_assert!(p.r2 <= 1.0 + 1e-12);
        }
    }
}
