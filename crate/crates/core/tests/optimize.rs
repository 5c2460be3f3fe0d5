use ccdist::optimize::{distance, level_values, lower_bound, upper_bound_if_in_mk, SolverConfig};
use ccdist::oracle::heisenberg_closed_form;
use ccdist::{builtin_group, Group, GroupPoint, Point};
use proptest::prelude::*;
use std::f64::consts::PI;

const FIXTURES: [&str; 4] = ["heisenberg", "htype(4,3)", "corank1(4)", "n32"];

fn setup(f: usize, v: &[f64]) -> (Group, Point) {
    let group: Group = builtin_group(FIXTURES[f]).unwrap();
    let q = group.q();
    let g = GroupPoint::new(v[..q].to_vec(), v[q..q + group.m()].to_vec());
    (group, g)
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heisenberg_matches_closed_form(r in 0.05f64..2.0, a in 0.0f64..6.3, t in -2.0f64..2.0) {
        let group: Group = builtin_group("heisenberg").unwrap();
        let g = GroupPoint::new(vec![r * a.cos(), r * a.sin()], vec![t]);
        let c = distance(&group, &g, &SolverConfig::default()).unwrap();
        prop_assert!(c.attained);
        prop_assert_eq!(c.k_used, 0);
        let exact = heisenberg_closed_form(&g.x, t);
        prop_assert!((c.d2 - exact).abs() <= 1e-8 * exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn squared_distance_is_homogeneous(f in 0usize..4, v in coords(), r in 0.3f64..2.5) {
        let (group, g) = setup(f, &v);
        let config = SolverConfig::default();
        let a = distance(&group, &g, &config).unwrap().d2;
        let b = distance(&group, &group.dilate(&g, r).unwrap(), &config).unwrap().d2;
        prop_assert!((b - r * r * a).abs() <= 1e-6 * (1.0 + b));
    }

    #[test]
    fn distance_is_inversion_symmetric(f in 0usize..4, v in coords()) {
        let (group, g) = setup(f, &v);
        let config = SolverConfig::default();
        let a = distance(&group, &g, &config).unwrap().d2;
        let b = distance(&group, &group.inverse(&g), &config).unwrap().d2;
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a));
    }

    #[test]
    fn certificate_brackets_the_value(f in 0usize..4, v in coords()) {
        let (group, g) = setup(f, &v);
        let c = distance(&group, &g, &SolverConfig::default()).unwrap();
        let slack = 1e-7 * g.scale();
        prop_assert!(c.lower <= c.d2 + slack && c.d2 <= c.upper + slack);
        prop_assert!(c.upper - c.lower <= 1e-6 * g.scale());
        prop_assert!(lower_bound(&group, &g, 0, &SolverConfig::default()).unwrap() <= c.d2 + slack);
    }
}

#[test]
fn vertical_axis_needs_level_one() {
    let group: Group = builtin_group("heisenberg").unwrap();
    for t in [0.5, -1.0, 2.0] {
        let g = GroupPoint::new(vec![0.0, 0.0], vec![t]);
        let c = distance(&group, &g, &SolverConfig::default()).unwrap();
        assert!(c.attained);
        assert_eq!(c.k_used, 1);
        assert!((c.d2 - 4.0 * PI * t.abs()).abs() <= 1e-8 * c.d2);
    }
}

#[test]
fn level_cap_gives_a_bracket() {
    let group: Group = builtin_group("heisenberg").unwrap();
    let g = GroupPoint::new(vec![0.0, 0.0], vec![1.0]);
    let config = SolverConfig {
        max_k: 0,
        ..SolverConfig::default()
    };
    let c = distance(&group, &g, &config).unwrap();
    assert!(!c.attained);
    assert!(c.lower <= 4.0 * PI * (1.0 + 1e-9));
    assert!(c.upper >= 4.0 * PI * (1.0 - 1e-9));
}

#[test]
fn identity_and_horizontal_points() {
    let group: Group = builtin_group("n32").unwrap();
    let config = SolverConfig::default();
    assert_eq!(distance(&group, &group.identity(), &config).unwrap().d2, 0.0);
    let g = GroupPoint::new(vec![0.3, -0.4, 1.2], vec![0.0; 3]);
    let c = distance(&group, &g, &config).unwrap();
    assert!((c.d2 - 1.69).abs() < 1e-10);
}

#[test]
fn level_values_are_monotone_on_n32() {
    let group: Group = builtin_group("n32").unwrap();
    let g = GroupPoint::new(vec![0.1, 0.0, 0.0], vec![0.5, -0.3, 0.2]);
    let levels = level_values(&group, &g, 3, &SolverConfig::default()).unwrap();
    for w in levels.windows(2) {
        assert!(w[0].value <= w[1].value + 1e-6 * g.scale());
    }
}

#[test]
fn upper_bound_in_m() {
    let group: Group = builtin_group("heisenberg").unwrap();
    let g = GroupPoint::new(vec![1.0, 0.0], vec![PI / 8.0]);
    let ub = upper_bound_if_in_mk(&group, &g, &[], 0, &SolverConfig::default()).unwrap();
    assert!((ub - PI * PI / 4.0).abs() < 1e-9);
    let axis = GroupPoint::new(vec![0.0, 0.0], vec![1.0]);
    assert!(upper_bound_if_in_mk(&group, &axis, &[], 0, &SolverConfig::default()).is_none());
}

#[test]
fn same_seed_same_answer() {
    let group: Group = builtin_group("n32").unwrap();
    let g = GroupPoint::new(vec![0.2, -0.5, 0.7], vec![0.4, 0.1, -0.6]);
    let config = SolverConfig {
        seed: 11,
        ..SolverConfig::default()
    };
    let a = serde_json::to_string(&distance(&group, &g, &config).unwrap()).unwrap();
    let b = serde_json::to_string(&distance(&group, &g, &config).unwrap()).unwrap();
    assert_eq!(a, b);
}
