use approx::assert_relative_eq;
use ccdist::bessel::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn q0_closed(w: f64) -> f64 {
    let c = (2.0 / PI).sqrt();
    if w > 0.0 {
        let z = w.sqrt();
        c * z.sinh() / z
    } else if w < 0.0 {
        let z = (-w).sqrt();
        c * z.sin() / z
    } else {
        c
    }
}

fn q1_closed(w: f64) -> f64 {
    let c = (2.0 / PI).sqrt();
    if w > 0.0 {
        let z = w.sqrt();
        c * (z * z.cosh() - z.sinh()) / z.powi(3)
    } else {
        let z = (-w).sqrt();
        c * (z.sin() - z * z.cos()) / z.powi(3)
    }
}

#[test]
fn zeros_of_three_halves_match_tan_fixed_points() {
    // tan z = z has one root in (lπ, (l+½)π)
    for l in 1..=20 {
        let (mut lo, mut hi) = (l as f64 * PI + 1e-9, (l as f64 + 0.5) * PI - 1e-9);
        let f = |z: f64| z.sin() - z * z.cos();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert_relative_eq!(bessel_zero(1, l).unwrap(), 0.5 * (lo + hi), max_relative = 1e-12);
    }
}

#[test]
fn first_zeros_increase_with_level() {
    for k in 0..20 {
        assert!(first_zero(k) < first_zero(k + 1));
    }
    assert_relative_eq!(first_zero(0), PI, max_relative = 1e-15);
}

#[test]
fn q_vanishes_at_negative_squared_zeros() {
    for k in 0..6 {
        let z = bessel_zero(k, 1).unwrap();
        assert!(q_k(k, -z * z).is_err());
        assert!(q_k(k, -z * z * (1.0 - 1e-9)).unwrap().abs() < 1e-7);
    }
}

#[test]
fn large_argument_logs_are_finite() {
    for k in [0, 3, 10] {
        let v = ln_q_k(k, 1e8).unwrap();
        // ln Q_k ≈ z − (k+1) ln z − ½ ln(2π) as z → ∞
        let z: f64 = 1e4;
        assert_relative_eq!(v, z - (k as f64 + 1.0) * z.ln() - 0.5 * (2.0 * PI).ln(), max_relative = 1e-6);
    }
}

#[test]
fn level_cap_is_enforced() {
    assert!(matches!(q_k(MAX_LEVEL + 10, 1.0), Err(ccdist::Error::LevelTooLarge(_))));
    assert!(bessel_zero(1, 0).is_err());
}

proptest! {
    #[test]
    fn q0_and_q1_match_elementary_forms(w in -9.8f64..400.0) {
        prop_assume!(w.abs() > 1e-3);
        prop_assert!((q_k(0, w).unwrap() - q0_closed(w)).abs() <= 1e-12 * (1.0 + q0_closed(w).abs()));
        prop_assert!((q_k(1, w).unwrap() - q1_closed(w)).abs() <= 1e-10 * (1.0 + q1_closed(w).abs()));
    }

    #[test]
    fn three_term_recursion(k in 0usize..12, frac in -0.99f64..1.0, big in 0.0f64..300.0) {
        let z1 = first_zero(k);
        let w = if frac < 0.0 { frac * z1 * z1 } else { frac * big };
        let (a, b, c) = (q_k(k, w).unwrap(), q_k(k + 1, w).unwrap(), q_k(k + 2, w).unwrap());
        let scale = a.abs() + (2 * k + 3) as f64 * b.abs() + (w * c).abs();
        prop_assert!((a - (2 * k + 3) as f64 * b - w * c).abs() <= 1e-12 * scale);
    }

    #[test]
    fn interlacing(k in 1usize..10, l in 1usize..30) {
        let ladder = zero_ladder(k, l + 1).unwrap();
        prop_assert!(ladder[k - 1][l - 1] < ladder[k][l - 1]);
        prop_assert!(ladder[k][l - 1] < ladder[k - 1][l]);
    }

    #[test]
    fn r_k_is_increasing_and_within_series_bound(k in 0usize..8, frac in -0.95f64..1.0) {
        let z1 = first_zero(k);
        let w = frac * z1 * z1;
        let r = r_k(k, w).unwrap();
        prop_assert!(r_k(k, w + 1e-3).unwrap() > r);
        let s = r_k_series(k, w, 64).unwrap();
        prop_assert!((r - s.value).abs() <= s.tail_bound);
        prop_assert!((r - s.corrected).abs() <= (r - s.value).abs() + 1e-12);
    }

    #[test]
    fn complex_log_agrees_on_real_axis(k in 0usize..6, w in -9.0f64..2e4) {
        let real = ln_q_k(k, w).unwrap();
        let c = ln_q_k_complex(k, Complex64::new(w, 0.0)).unwrap();
        prop_assert!((c.re - real).abs() <= 1e-10 * (1.0 + real.abs()));
    }

    #[test]
    fn r_k_derivatives_match_differences(k in 0usize..5, w in -8.0f64..30.0) {
        let d = r_k_derivatives(k, w).unwrap();
        let h = 1e-5;
        let fd = (r_k(k, w + h).unwrap() - r_k(k, w - h).unwrap()) / (2.0 * h);
        prop_assert!((d[1] - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
    }
}
