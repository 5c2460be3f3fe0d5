use ccdist::bessel::first_zero;
use ccdist::geodesics::*;
use ccdist::matfun::spectral;
use ccdist::optimize::{distance, SolverConfig};
use ccdist::{builtin_group, Group, GroupPoint};
use proptest::prelude::*;
use std::f64::consts::PI;

const FIXTURES: [&str; 4] = ["heisenberg", "htype(4,3)", "corank1(4)", "n32"];

fn theta_in_omega(group: &Group, dir: &[f64], frac: f64) -> Vec<f64> {
    let d = &dir[..group.m()];
    let n = spectral(group, d).unwrap().norm().max(1e-12);
    d.iter().map(|v| v * frac * first_zero(0) / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_matches_closed_form(f in 0usize..4, zeta in prop::collection::vec(-2.0f64..2.0, 6),
                               dir in prop::collection::vec(-1.0f64..1.0, 3), frac in 0.0f64..1.8) {
        prop_assume!(dir.iter().any(|v| v.abs() > 1e-3));
        let group: Group = builtin_group(FIXTURES[f]).unwrap();
        let zeta = &zeta[..group.q()];
        let theta = theta_in_omega(&group, &dir, frac);
        prop_assume!(in_v_set(&group, &theta).unwrap());
        prop_assume!(spectral(&group, &theta).unwrap().beta.iter().all(|b| (b.sqrt() / PI - (b.sqrt() / PI).round()).abs() > 1e-3));
        let tau: Vec<f64> = theta.iter().map(|v| 2.0 * v).collect();
        let (end, drift) = exp_map_with_speed(&group, zeta, &tau).unwrap();
        let x = x_component_closed_form(&group, zeta, &theta).unwrap();
        for (a, b) in x.iter().zip(&end.x) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
        let speed: f64 = zeta.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(drift <= 1e-8 * (1.0 + speed));
    }

    #[test]
    fn geodesics_reproduce_their_endpoint(f in 0usize..4, zeta in prop::collection::vec(-1.0f64..1.0, 6),
                                          dir in prop::collection::vec(-1.0f64..1.0, 3), frac in 0.0f64..0.9) {
        prop_assume!(dir.iter().any(|v| v.abs() > 1e-3));
        let group: Group = builtin_group(FIXTURES[f]).unwrap();
        let zeta = zeta[..group.q()].to_vec();
        prop_assume!(zeta.iter().any(|v| v.abs() > 1e-2));
        let theta = theta_in_omega(&group, &dir, frac);
        let tau: Vec<f64> = theta.iter().map(|v| 2.0 * v).collect();
        let g = exp_map(&group, &zeta, &tau).unwrap();
        let config = SolverConfig::default();
        let cert = distance(&group, &g, &config).unwrap();
        let records = solve_geodesics(&group, &g, cert.k_used, &config).unwrap();
        prop_assert!(!records.is_empty());
        for r in &records {
            prop_assert!(r.endpoint_residual <= 1e-8 * (1.0 + g.euclidean_norm()));
        }
        let best = records.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
        prop_assert!((best - cert.d2).abs() <= 1e-6 * cert.d2.max(1e-12));
        let energy: f64 = zeta.iter().map(|v| v * v).sum();
        prop_assert!(cert.d2 <= energy * (1.0 + 1e-8));
    }
}

#[test]
fn heisenberg_cut_locus() {
    let group: Group = builtin_group("heisenberg").unwrap();
    let config = SolverConfig::default();
    let off = cut_locus_test(&group, &GroupPoint::new(vec![1.0, 0.0], vec![PI / 8.0]), &config);
    assert_eq!(off.verdict, Verdict::NotCut);
    assert_eq!(off.minimizing, 1);
    let axis = cut_locus_test(&group, &GroupPoint::new(vec![0.0, 0.0], vec![-1.0]), &config);
    assert_eq!(axis.verdict, Verdict::Cut);
    let id = cut_locus_test(&group, &group.identity(), &config);
    assert_eq!(id.verdict, Verdict::Unknown);
}

#[test]
fn horizontal_points_are_not_cut() {
    let group: Group = builtin_group("htype(4,3)").unwrap();
    let v = cut_locus_test(&group, &GroupPoint::new(vec![0.3, -0.2, 0.5, 0.1], vec![0.0; 3]), &SolverConfig::default());
    assert_eq!(v.verdict, Verdict::NotCut);
}

#[test]
fn gm_classification() {
    let heis: Group = builtin_group("heisenberg").unwrap();
    assert!(matches!(classify_gm(&heis, 100, 3).unwrap(), GmClassification::LikelyGM(f) if f >= 0.99));
    let n32: Group = builtin_group("n32").unwrap();
    assert!(matches!(classify_gm(&n32, 300, 3).unwrap(), GmClassification::NonGMEvidence(w) if !w.is_empty()));
    assert!(classify_gm(&heis, 0, 3).is_err());
}

#[test]
fn v_set_excludes_multiples_of_pi() {
    let group: Group = builtin_group("heisenberg").unwrap();
    assert!(in_v_set(&group, &[0.5]).unwrap());
    assert!(!in_v_set(&group, &[PI]).unwrap());
    assert!(!in_v_set(&group, &[2.0 * PI]).unwrap());
    assert!(matches!(x_component_closed_form(&group, &[1.0, 0.0], &[PI]), Err(ccdist::Error::SingularTheta)));
}
