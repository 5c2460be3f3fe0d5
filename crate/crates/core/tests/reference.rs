use ccdist::bessel::first_zero;
use ccdist::matfun::{grad_quadratic_form, quadratic_form, spectral, EvenKernel};
use ccdist::optimize::{minimax_residual_check, TauRegion};
use ccdist::oracle::heisenberg_closed_form;
use ccdist::reference::{phi, phi_k_star};
use ccdist::{builtin_group, Group, GroupPoint, Point};
use proptest::prelude::*;

const FIXTURES: [&str; 4] = ["heisenberg", "htype(4,3)", "corank1(4)", "n32"];

fn setup(f: usize, v: &[f64]) -> (Group, Point) {
    let group: Group = builtin_group(FIXTURES[f]).unwrap();
    let q = group.q();
    let g = GroupPoint::new(v[..q].to_vec(), v[q..q + group.m()].to_vec());
    (group, g)
}

/// `τ` along `dir` with `‖Ũ(τ)‖ = frac · Z_{k,1}`.
fn tau_in(group: &Group, dir: &[f64], frac: f64, k: usize) -> Vec<f64> {
    let d = &dir[..group.m()];
    let n = spectral(group, d).unwrap().norm().max(1e-12);
    d.iter().map(|v| v * frac * first_zero(k) / n).collect()
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 8)
}

fn direction() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn phi_at_zero_is_squared_norm(f in 0usize..4, v in coords()) {
        let (group, g) = setup(f, &v);
        let zero = vec![0.0; group.m()];
        let expected: f64 = g.x.iter().map(|a| a * a).sum();
        prop_assert!((phi(&group, &g, &zero).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn phi_scales_quadratically_under_dilation(f in 0usize..4, v in coords(), d in direction(), frac in 0.0f64..0.95, r in 0.2f64..3.0) {
        let (group, g) = setup(f, &v);
        let tau = tau_in(&group, &d, frac, 0);
        let a = phi(&group, &group.dilate(&g, r).unwrap(), &tau).unwrap();
        let b = phi(&group, &g, &tau).unwrap();
        prop_assert!((a - r * r * b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn midpoint_concavity(f in 0usize..4, k in 0usize..3, v in coords(), s in prop::collection::vec(-1.0f64..1.0, 8),
                          d1 in direction(), d2 in direction(), f1 in 0.0f64..0.97, f2 in 0.0f64..0.97) {
        let (group, g) = setup(f, &v);
        let q = group.q();
        let segs: Vec<Vec<f64>> = (0..k).map(|j| (0..q).map(|i| s[(j * q + i) % s.len()]).collect()).collect();
        let a = tau_in(&group, &d1, f1, k);
        let b = tau_in(&group, &d2, f2, k);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let val = |t: &[f64]| phi_k_star(&group, &g, &segs, t, k, 0).unwrap().value;
        let (fa, fb, fm) = (val(&a), val(&b), val(&mid));
        prop_assert!(fm >= 0.5 * (fa + fb) - 1e-10 * (1.0 + fa.abs() + fb.abs()));
    }

    #[test]
    fn weak_duality_on_heisenberg(x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, t in -1.5f64..1.5, frac in -0.999f64..0.999) {
        let group: Group = builtin_group("heisenberg").unwrap();
        let g = GroupPoint::new(vec![x0, x1], vec![t]);
        let value = phi(&group, &g, &[frac * std::f64::consts::PI]).unwrap();
        let d2 = heisenberg_closed_form(&g.x, t);
        prop_assert!(value <= d2 * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn gradient_of_quadratic_form(f in 0usize..4, v in coords(), d in direction(), frac in 0.05f64..0.9) {
        let (group, g) = setup(f, &v);
        let tau = tau_in(&group, &d, frac, 0);
        let grad = grad_quadratic_form(&group, EvenKernel::Cot, &tau, &g.x).unwrap();
        for i in 0..group.m() {
            let h = 1e-6;
            let mut p = tau.clone();
            let mut mneg = tau.clone();
            p[i] += h;
            mneg[i] -= h;
            let fd = (quadratic_form(&group, EvenKernel::Cot, &p, &g.x).unwrap() - quadratic_form(&group, EvenKernel::Cot, &mneg, &g.x).unwrap()) / (2.0 * h);
            prop_assert!((grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn next_level_minimum_reproduces_current_level(f in 0usize..4, k in 0usize..3, v in coords(), d in direction(), frac in 0.0f64..0.9) {
        let (group, g) = setup(f, &v);
        let q = group.q();
        let s: Vec<Vec<f64>> = (0..k).map(|j| (0..q).map(|i| 0.3 * v[(i + j) % 8]).collect()).collect();
        let tau = tau_in(&group, &d, frac, k);
        let report = minimax_residual_check(&group, &g, &s, &tau, k).unwrap();
        prop_assert_eq!(report.region, TauRegion::Inside);
        prop_assert!(report.passed, "{:?}", report);
    }
}

#[test]
fn between_levels_the_next_level_diverges() {
    let group: Group = builtin_group("heisenberg").unwrap();
    let g = GroupPoint::new(vec![0.5, 0.2], vec![0.3]);
    let tau = vec![0.5 * (first_zero(0) + first_zero(1))];
    let report = minimax_residual_check(&group, &g, &[], &tau, 0).unwrap();
    assert_eq!(report.region, TauRegion::Between);
    assert!(report.divergent && report.passed);
}

#[test]
fn evaluation_outside_the_domain_fails() {
    let group: Group = builtin_group("heisenberg").unwrap();
    let g = GroupPoint::new(vec![1.0, 0.0], vec![0.0]);
    assert!(phi(&group, &g, &[3.2]).is_err());
    assert!(phi_k_star(&group, &g, &[vec![0.0, 0.0]], &[4.4], 1, 0).is_ok());
    assert!(phi_k_star(&group, &g, &[], &[0.1], 1, 0).is_err());
}
