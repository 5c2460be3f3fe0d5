use ccdist::optimize::{distance, SolverConfig};
use ccdist::oracle::*;
use ccdist::{builtin_group, Group, GroupPoint};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn closed_form_special_values() {
    assert!((heisenberg_closed_form(&[1.0, 0.0], PI / 8.0) - PI * PI / 4.0).abs() < 1e-12);
    assert!((heisenberg_closed_form(&[0.0, 0.0], 1.0) - 4.0 * PI).abs() < 1e-12);
    assert!((heisenberg_closed_form(&[0.6, 0.8], 0.0) - 1.0).abs() < 1e-14);
}

#[test]
fn straight_controls_reach_horizontal_points() {
    let group: Group = builtin_group("htype(4,3)").unwrap();
    let u = vec![vec![0.1, 0.2, -0.3, 0.4]; 8];
    let end = integrate_controls(&group, &u).unwrap();
    for (a, b) in end.x.iter().zip(&u[0]) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(end.t.iter().all(|v| v.abs() < 1e-14));
    assert!((energy_of(&u) - 0.3).abs() < 1e-14);
}

#[test]
fn direct_method_is_an_upper_bound_close_to_the_closed_form() {
    let group: Group = builtin_group("heisenberg").unwrap();
    for (x, t) in [([1.0, 0.0], 0.2), ([0.3, -0.4], 0.5), ([0.0, 0.8], -0.1)] {
        let g = GroupPoint::new(x.to_vec(), vec![t]);
        let exact = heisenberg_closed_form(&g.x, t);
        let r = direct_distance(&group, &g, 64, 4, 3).unwrap();
        assert!(r.residual < 1e-8, "{}", r.residual);
        assert!(r.energy >= exact * (1.0 - 1e-6));
        assert!(r.energy <= exact * (1.0 + 2e-2), "{} vs {exact}", r.energy);
    }
}

#[test]
fn shooting_matches_the_closed_form() {
    let group: Group = builtin_group("heisenberg").unwrap();
    for (x, t) in [([1.0, 0.0], PI / 8.0), ([0.5, 0.5], -0.3), ([0.0, 0.0], 0.7)] {
        let g = GroupPoint::new(x.to_vec(), vec![t]);
        let exact = heisenberg_closed_form(&g.x, t);
        let r = shooting_distance(&group, &g, 16, 5).unwrap();
        assert!((r.energy - exact).abs() <= 1e-6 * exact, "{} vs {exact}", r.energy);
        assert!(r.records.iter().all(|rec| rec.residual < 1e-8));
    }
}

#[test]
fn shooting_agrees_with_the_solver_on_n32() {
    let group: Group = builtin_group("n32").unwrap();
    let g = GroupPoint::new(vec![0.4, -0.2, 0.3], vec![0.1, 0.2, -0.15]);
    let d2 = distance(&group, &g, &SolverConfig::default()).unwrap().d2;
    let r = shooting_distance(&group, &g, 16, 9).unwrap();
    assert!(r.energy >= d2 * (1.0 - 1e-6));
    assert!(r.energy <= d2 * (1.0 + 1e-3), "{} vs {d2}", r.energy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_is_homogeneous(x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, t in -2.0f64..2.0, r in 0.1f64..5.0) {
        let a = heisenberg_closed_form(&[x0, x1], t);
        let b = heisenberg_closed_form(&[r * x0, r * x1], r * r * t);
        prop_assert!((b - r * r * a).abs() <= 1e-10 * (1.0 + b));
        prop_assert!(a >= x0 * x0 + x1 * x1 - 1e-12);
    }

    #[test]
    fn closed_form_satisfies_predicted_endpoint(r in 0.1f64..2.0, a in 0.0f64..6.3, theta in -3.0f64..3.0) {
        let group: Group = builtin_group("heisenberg").unwrap();
        let zeta = [r * a.cos(), r * a.sin()];
        let x = predicted_x(&group, &zeta, &[theta]).unwrap();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expected = r * (theta.sin() / theta).abs();
        prop_assert!((norm - expected).abs() <= 1e-10 * (1.0 + expected));
    }
}
