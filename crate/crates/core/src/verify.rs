//! Verification suites. Each numbered criterion is a set of checks with the
//! measured worst case and its tolerance; suites group criteria by topic.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_zero, first_zero, q_k, r_k, r_k_series, zero_ladder};
use crate::error::{Error, Result};
use crate::geodesics::{classify_gm, cut_locus_test, exp_map, solve_geodesics, x_component_closed_form, GmClassification, Verdict};
use crate::group::{builtin_group, GroupPoint, StepTwoGroup};
use crate::heatkernel::{ln_asymptotic_leading_term, p_k_h, varadhan_estimate, verify_relation_relpk, QuadConfig};
use crate::matfun::spectral;
use crate::optimize::{distance, level_values, InnerStatus, SolverConfig};
use crate::oracle::{direct_distance, heisenberg_closed_form, shooting_distance};
use crate::reference::phi_k_star;

type Group = StepTwoGroup<f64>;
type Point = GroupPoint<f64>;

pub const SUITES: [&str; 8] = ["bessel", "concavity", "bounds", "relpk", "varadhan", "geodesic", "cutlocus", "oracle-xcheck"];

pub const FIXTURES: [&str; 4] = ["heisenberg", "htype(4,3)", "corank1(4)", "n32"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub note: String,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, samples: usize) -> Self {
        Check {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            samples,
            note: String::new(),
        }
    }

    fn count(name: impl Into<String>, failures: usize, samples: usize) -> Self {
        Check::at_most(name, failures as f64, 0.0, samples)
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }
}

fn fixture(name: &str) -> Group {
    builtin_group(name).expect("builtin fixture")
}

fn uniform_point(group: &Group, rng: &mut ChaCha8Rng) -> Point {
    GroupPoint::new(
        (0..group.q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..group.m()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

/// Uniformly scaled random `τ` with `‖Ũ(τ)‖ < fraction · Z_{k,1}`.
fn random_tau(group: &Group, k: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let d: Vec<f64> = (0..group.m()).map(|_| normal.sample(rng)).collect();
    let n = spectral(group, &d)?.norm();
    let r = rng.random_range(0.0..fraction) * first_zero(k) / n;
    Ok(d.iter().map(|v| v * r).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn timed(id: usize, title: &str, body: impl FnOnce() -> Vec<Check>) -> CriterionReport {
    let start = Instant::now();
    let checks = body();
    CriterionReport {
        id,
        title: title.into(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn failed(name: &str, e: &Error) -> Check {
    Check {
        name: name.into(),
        passed: false,
        measured: f64::NAN,
        tolerance: 0.0,
        samples: 0,
        note: e.to_string(),
    }
}

/// Distance against the closed form on a 20×20 grid of `(|x|, t)`.
pub fn criterion_heisenberg_grid() -> CriterionReport {
    timed(1, "Heisenberg closed form on a 20x20 grid", || {
        let group = fixture("heisenberg");
        let config = SolverConfig::default();
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        let mut wrong_level = 0;
        let mut errors = 0;
        for i in 0..20 {
            for j in 0..20 {
                let r = 0.1 + 1.9 * i as f64 / 19.0;
                let t = -1.0 + 2.0 * j as f64 / 19.0;
                let g = GroupPoint::new(vec![r, 0.0], vec![t]);
                match distance(&group, &g, &config) {
                    Ok(c) => {
                        worst = worst.max(rel(c.d2, heisenberg_closed_form(&g.x, t)));
                        wrong_level += usize::from(c.k_used != 0);
                    }
                    Err(_) => errors += 1,
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        vec![
            Check::at_most("relative error", worst, 1e-8, 400),
            Check::count("k_used != 0 or solver error", wrong_level + errors, 400),
            Check::at_most("runtime [s]", elapsed, 30.0, 400),
        ]
    })
}

/// Points on the vertical axis need level 1 and reproduce `4π|t|`.
pub fn criterion_cut_axis() -> CriterionReport {
    timed(2, "Heisenberg vertical axis needs level 1", || {
        let group = fixture("heisenberg");
        let config = SolverConfig::default();
        let mut worst: f64 = 0.0;
        let mut bad_levels = 0;
        let ts = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0];
        for &t in &ts {
            let g = GroupPoint::new(vec![0.0, 0.0], vec![t]);
            let levels = level_values(&group, &g, 1, &config);
            let cert = distance(&group, &g, &config);
            match (levels, cert) {
                (Ok(l), Ok(c)) => {
                    let ok = l[0].inner_status == InnerStatus::Boundary && !l[0].attained && l[1].attained;
                    bad_levels += usize::from(!ok);
                    worst = worst.max(rel(c.d2, 4.0 * PI * t.abs()));
                }
                _ => bad_levels += 1,
            }
        }
        vec![
            Check::count("level 0 boundary, level 1 attained", bad_levels, ts.len()),
            Check::at_most("relative error of d2 vs 4pi|t|", worst, 1e-5, ts.len()),
        ]
    })
}

/// Best of the direct and shooting oracles.
pub fn oracle_best(group: &Group, g: &Point, seed: u64) -> Result<f64> {
    let direct = direct_distance(group, g, 64, 4, seed)?.energy;
    let shoot = shooting_distance(group, g, 16, seed).map(|s| s.energy).unwrap_or(f64::INFINITY);
    Ok(direct.min(shoot))
}

/// Distance against the oracles on random points of the non-GM group `N_{3,2}`.
pub fn criterion_oracle_n32(seed: u64) -> CriterionReport {
    timed(5, "n32 distance matches oracle", || {
        let group = fixture("n32");
        let config = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Point> = (0..20).map(|_| uniform_point(&group, &mut rng)).collect();
        let errs: Vec<Result<f64>> = points
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let d2 = distance(&group, g, &config)?.d2;
                Ok(rel(d2, oracle_best(&group, g, seed + i as u64)?))
            })
            .collect();
        let failures = errs.iter().filter(|e| e.is_err()).count();
        let worst = errs.iter().filter_map(|e| e.as_ref().ok()).fold(0.0f64, |a, &b| a.max(b));
        vec![
            Check::at_most("relative gap to oracle", worst, 1e-3, 20),
            Check::count("solver errors", failures, 20),
        ]
    })
}

fn bounds_samples(group: &Group, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..50).map(|_| uniform_point(group, &mut rng)).collect()
}

/// Level values never exceed the direct-transcription energy.
pub fn criterion_lower_bound(seed: u64) -> CriterionReport {
    timed(3, "level values bound d2 from below", || {
        let config = SolverConfig::default();
        FIXTURES
            .iter()
            .map(|name| {
                let group = fixture(name);
                let out: Vec<Result<f64>> = bounds_samples(&group, seed)
                    .par_iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let levels = level_values(&group, g, 2, &config)?;
                        let direct = direct_distance(&group, g, 128, 2, seed + i as u64)?.energy;
                        let top = levels.iter().map(|l| l.value).fold(f64::NEG_INFINITY, f64::max);
                        Ok((top - direct) / g.scale())
                    })
                    .collect();
                let errors = out.iter().filter(|r| r.is_err()).count();
                let worst = out.iter().filter_map(|r| r.as_ref().ok()).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut c = Check::at_most(format!("{name}: max (value_k - direct)/scale"), worst, 1e-3, out.len());
                if errors > 0 {
                    c.passed = false;
                    c.note = format!("{errors} solver errors");
                }
                c
            })
            .collect()
    })
}

/// Level values are non-decreasing and constant once attained.
pub fn criterion_monotone(seed: u64) -> CriterionReport {
    timed(4, "level values are monotone in k", || {
        let config = SolverConfig::default();
        let mut checks = Vec::new();
        for name in FIXTURES {
            let group = fixture(name);
            let out: Vec<Result<(f64, f64)>> = bounds_samples(&group, seed)
                .par_iter()
                .map(|g| {
                    let l = level_values(&group, g, 3, &config)?;
                    let mut drop: f64 = f64::NEG_INFINITY;
                    let mut change: f64 = 0.0;
                    for k in 0..3 {
                        drop = drop.max((l[k].value - l[k + 1].value) / g.scale());
                        if l[k].attained {
                            change = change.max(rel(l[k + 1].value, l[k].value));
                        }
                    }
                    Ok((drop, change))
                })
                .collect();
            let errors = out.iter().filter(|r| r.is_err()).count();
            let ok: Vec<(f64, f64)> = out.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            let drop = ok.iter().fold(f64::NEG_INFINITY, |a, p| a.max(p.0));
            let change = ok.iter().fold(0.0f64, |a, p| a.max(p.1));
            checks.push(Check::at_most(format!("{name}: max (value_k - value_k+1)/scale"), drop, 1e-6, ok.len()));
            checks.push(Check::at_most(format!("{name}: max change after attainment"), change, 1e-8, ok.len()));
            checks.push(Check::count(format!("{name}: solver errors"), errors, out.len()));
        }
        checks
    })
}

/// Spherical Bessel `j_k(z)` by upward recurrence, for `z > k`.
fn spherical_j(k: usize, z: f64) -> f64 {
    let (s, c) = z.sin_cos();
    let mut j0 = s / z;
    if k == 0 {
        return j0;
    }
    let mut j1 = s / (z * z) - c / z;
    for n in 1..k {
        let j2 = (2 * n + 1) as f64 / z * j1 - j0;
        j0 = j1;
        j1 = j2;
    }
    j1
}

/// Root of `tan z = z` in `(π, 3π/2)` by bisection on `sin z − z cos z`.
fn tan_fixed_point() -> f64 {
    let f = |z: f64| z.sin() - z * z.cos();
    let (mut lo, mut hi) = (PI, 1.5 * PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zeros, interlacing, enclosures, recursion and the partial-fraction series.
pub fn criterion_bessel(seed: u64) -> CriterionReport {
    timed(6, "Bessel zeros, recursion and series", || {
        let mut checks = Vec::new();
        let ladder = match zero_ladder(8, 65) {
            Ok(l) => l,
            Err(e) => return vec![failed("zero ladder", &e)],
        };
        let z0 = (1..=64).map(|l| rel(ladder[0][l - 1], l as f64 * PI)).fold(0.0, f64::max);
        checks.push(Check::at_most("Z_0,l = l pi (relative)", z0, 1e-12, 64));
        let residual = (0..=8)
            .flat_map(|k| (0..64).map(move |l| (k, l)))
            .map(|(k, l)| {
                let z = ladder[k][l];
                spherical_j(k, z).abs() * z
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most("|z j_k(Z_k,l)|, k <= 8, l <= 64", residual, 1e-10, 9 * 64));
        let z11 = bessel_zero(1, 1).unwrap_or(f64::NAN);
        checks.push(Check::at_most("|Z_1,1 - bisection of tan z = z|", (z11 - tan_fixed_point()).abs(), 1e-9, 1));
        checks.push(Check::at_most("|Z_1,1 - 4.493409457909064|", (z11 - 4.493409457909064).abs(), 1e-9, 1));
        let mut interlace = 0;
        let mut enclosure = 0;
        let mut first_bad = None;
        for k in 0..=8 {
            for l in 1..=64 {
                let z = ladder[k][l - 1];
                if k >= 1 && !(ladder[k - 1][l - 1] < z && z < ladder[k - 1][l]) {
                    interlace += 1;
                }
                let lo = ((k as f64 - 1.0) / 2.0 + l as f64) * PI;
                let hi = ((k as f64 + 1.0) / 2.0 + l as f64) * PI;
                if !(lo <= z && z <= hi) {
                    enclosure += 1;
                    first_bad.get_or_insert((k, l, z, lo));
                }
            }
        }
        checks.push(Check::count("interlacing Z_k-1,l < Z_k,l < Z_k-1,l+1", interlace, 9 * 64));
        let mut c = Check::count("enclosure ((k-1)/2+l)pi <= Z_k,l <= ((k+1)/2+l)pi", enclosure, 9 * 64);
        if let Some((k, l, z, lo)) = first_bad {
            c.note = format!("e.g. Z_{k},{l} = {z:.10} below {lo:.10}");
        }
        checks.push(c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rec: f64 = 0.0;
        let mut series_excess: f64 = f64::NEG_INFINITY;
        let mut errors = 0;
        for _ in 0..100 {
            let k = rng.random_range(0..=8usize);
            let zk = first_zero(k);
            let w = rng.random_range(-0.99 * zk * zk..200.0);
            let terms = (q_k(k, w), q_k(k + 1, w), q_k(k + 2, w));
            let (Ok(a), Ok(b), Ok(c)) = terms else {
                errors += 1;
                continue;
            };
            let lhs = (2 * k + 3) as f64 * b + w * c;
            rec = rec.max((a - lhs).abs() / (a.abs() + (2 * k + 3) as f64 * b.abs() + (w * c).abs()));
            match (r_k(k, w), r_k_series(k, w, 64)) {
                (Ok(r), Ok(s)) => series_excess = series_excess.max((r - s.value).abs() - s.tail_bound),
                _ => errors += 1,
            }
        }
        checks.push(Check::at_most("recursion residual (relative to term sizes)", rec, 1e-11, 100));
        checks.push(Check::at_most("|r_k - series| - tail bound", series_excess, 0.0, 100));
        checks.push(Check::count("evaluation errors", errors, 100));
        checks
    })
}

/// Midpoint concavity of `Φ_{k,*}(g; s, ·)` on `Ω_k` for `k ≤ 2`.
pub fn criterion_concavity(seed: u64) -> CriterionReport {
    timed(7, "midpoint concavity of the reference functions", || {
        let mut checks = Vec::new();
        for (fi, name) in FIXTURES.iter().enumerate() {
            let group = fixture(name);
            for k in 0..=2 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((fi * 3 + k) as u64) << 32);
                let mut violations = 0;
                let mut worst: f64 = f64::NEG_INFINITY;
                let mut errors = 0;
                for _ in 0..1000 {
                    let g = uniform_point(&group, &mut rng);
                    let s: Vec<Vec<f64>> = (0..k).map(|_| (0..group.q()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                    let (Ok(a), Ok(b)) = (random_tau(&group, k, 0.98, &mut rng), random_tau(&group, k, 0.98, &mut rng)) else {
                        errors += 1;
                        continue;
                    };
                    let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                    let f = |tau: &[f64]| phi_k_star(&group, &g, &s, tau, k, 0).map(|e| e.value);
                    let (Ok(fa), Ok(fb), Ok(fm)) = (f(&a), f(&b), f(&mid)) else {
                        errors += 1;
                        continue;
                    };
                    let gap = (0.5 * (fa + fb) - fm) / (1.0 + fa.abs() + fb.abs());
                    worst = worst.max(gap);
                    violations += usize::from(gap > 1e-10);
                }
                checks.push(
                    Check::count(format!("{name}, k={k}: violations beyond 1e-10"), violations + errors, 1000).note(format!("worst relative gap {worst:.3e}")),
                );
            }
        }
        checks
    })
}

const RELPK_SAMPLES: [([f64; 2], f64); 3] = [([0.3, -0.2], 0.1), ([1.0, 0.5], -0.4), ([0.0, 0.0], 0.7)];

/// Both sides of the `P_k` recursion by nested quadrature.
pub fn criterion_relpk() -> CriterionReport {
    timed(8, "P_k recursion relation", || {
        let group = fixture("heisenberg");
        let quad = QuadConfig::default();
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        let mut checks = Vec::new();
        for (x, t) in RELPK_SAMPLES {
            match verify_relation_relpk(&group, 0, &x, &[t], 1.0, &quad) {
                Ok(r) => worst = worst.max(r.relative_discrepancy),
                Err(e) => checks.push(failed("relation", &e)),
            }
        }
        checks.push(Check::at_most("relative discrepancy", worst, 1e-2, RELPK_SAMPLES.len()));
        checks.push(Check::at_most("runtime [s]", start.elapsed().as_secs_f64(), 60.0, RELPK_SAMPLES.len()));
        checks
    })
}

/// `P_{k,h} > 0` at random arguments.
pub fn criterion_positivity(seed: u64) -> CriterionReport {
    timed(9, "positivity of P_k,h", || {
        let quad = QuadConfig::default();
        let mut checks = Vec::new();
        for name in ["heisenberg", "corank1(4)"] {
            let group = fixture(name);
            for k in 0..=2 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed + k as u64);
                let samples: Vec<(Point, f64)> = (0..50)
                    .map(|_| {
                        let g = uniform_point(&group, &mut rng);
                        (g, 10f64.powf(rng.random_range(-1.3..0.0)))
                    })
                    .collect();
                let bad = samples
                    .par_iter()
                    .filter(|(g, h)| !matches!(p_k_h(&group, k, &g.x, &g.t, *h, &quad), Ok(p) if p.converged && p.value > 0.0))
                    .count();
                checks.push(Check::count(format!("{name}, k={k}: non-positive or unconverged"), bad, 50));
            }
        }
        checks
    })
}

const M_POINTS: [([f64; 2], f64); 5] = [
    ([1.0, 0.0], PI / 8.0),
    ([0.5, 0.5], 0.2),
    ([1.0, 1.0], -0.3),
    ([2.0, 0.0], 0.5),
    ([0.3, -0.7], 0.1),
];

/// `−4h ln p_h` toward `d²`, and the leading small-time term.
pub fn criterion_varadhan() -> CriterionReport {
    timed(10, "Varadhan limit and small-time asymptotics", || {
        let group = fixture("heisenberg");
        let quad = QuadConfig::default();
        let g = GroupPoint::new(vec![1.0, 0.0], vec![PI / 8.0]);
        let target = PI * PI / 4.0;
        let mut checks = Vec::new();
        match varadhan_estimate(&group, &g, &[1e-1, 3e-2, 1e-2, 3e-3], &quad) {
            Ok(v) => {
                let toward = v.monotone && (v.estimates[3] - target).abs() < (v.estimates[0] - target).abs();
                checks.push(Check::count("monotone toward pi^2/4", usize::from(!toward), 4));
                checks.push(Check::at_most("relative error of extrapolation", rel(v.extrapolated, target), 0.02, 4));
            }
            Err(e) => checks.push(failed("varadhan", &e)),
        }
        let mut worst: f64 = 0.0;
        for (x, t) in M_POINTS {
            let g = GroupPoint::new(x.to_vec(), vec![t]);
            let ratio =
                crate::heatkernel::heat_kernel(&group, &g, 1e-3, &quad).and_then(|p| Ok((p.ln_value - ln_asymptotic_leading_term(&group, &g, 0, 1e-3)?).exp()));
            worst = worst.max(ratio.map(|r| (r - 1.0).abs()).unwrap_or(f64::INFINITY));
        }
        checks.push(Check::at_most("max |p_h / leading term - 1| at h = 1e-3", worst, 0.1, M_POINTS.len()));
        checks
    })
}

/// `exp` against its closed form, and `solve_geodesics` against `d²`.
pub fn criterion_geodesics(seed: u64) -> CriterionReport {
    timed(11, "geodesic round trip", || {
        let config = SolverConfig::default();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut checks = Vec::new();
        for name in FIXTURES {
            let group = fixture(name);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let covectors: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
                .map(|_| {
                    let zeta = (0..group.q()).map(|_| normal.sample(&mut rng)).collect();
                    let theta = random_tau(&group, 0, 0.9, &mut rng).expect("nonzero direction");
                    (zeta, theta)
                })
                .collect();
            // (closed form gap, record residual / (1+|g|), energy gap, failures)
            let out: Vec<(f64, f64, f64, usize)> = covectors
                .par_iter()
                .map(|(zeta, theta)| {
                    let tau: Vec<f64> = theta.iter().map(|v| 2.0 * v).collect();
                    let Ok(g) = exp_map(&group, zeta, &tau) else { return (f64::NAN, 0.0, 0.0, 1) };
                    let closed = x_component_closed_form(&group, zeta, theta).map(|x| x.iter().zip(&g.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                    let Ok(closed) = closed else { return (f64::NAN, 0.0, 0.0, 1) };
                    let Ok(cert) = distance(&group, &g, &config) else {
                        return (closed, 0.0, 0.0, 1);
                    };
                    let records = match solve_geodesics(&group, &g, cert.k_used, &config) {
                        Ok(r) if !r.is_empty() => r,
                        _ => return (closed, 0.0, 0.0, 1),
                    };
                    let size = 1.0 + g.euclidean_norm();
                    let residual = records.iter().map(|r| r.endpoint_residual / size).fold(0.0, f64::max);
                    let best = records.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
                    let gap = if cert.attained { rel(best, cert.d2) } else { 0.0 };
                    (closed, residual, gap, 0)
                })
                .collect();
            let fold = |f: fn(&(f64, f64, f64, usize)) -> f64| out.iter().map(f).fold(0.0, f64::max);
            checks.push(Check::at_most(format!("{name}: exp vs closed form"), fold(|o| o.0), 1e-8, 200));
            checks.push(Check::at_most(format!("{name}: record endpoint residual / (1+|g|)"), fold(|o| o.1), 1e-8, 200));
            checks.push(Check::at_most(format!("{name}: minimal energy vs d2 (relative)"), fold(|o| o.2), 1e-6, 200));
            checks.push(Check::count(format!("{name}: failures"), out.iter().map(|o| o.3).sum(), 200));
        }
        checks
    })
}

const NOT_CUT: [([f64; 2], f64); 10] = [
    ([1.0, 0.0], PI / 8.0),
    ([0.5, 0.5], 0.2),
    ([1.0, 1.0], -0.3),
    ([2.0, 0.0], 0.5),
    ([0.3, -0.7], 0.1),
    ([-1.0, 0.2], 0.7),
    ([0.1, 0.1], 0.05),
    ([1.5, -0.5], -1.0),
    ([0.0, 1.0], 0.3),
    ([0.7, 0.7], -0.6),
];

/// Cut-locus verdicts on the Heisenberg group.
pub fn criterion_cut_locus() -> CriterionReport {
    timed(12, "Heisenberg cut-locus verdicts", || {
        let group = fixture("heisenberg");
        let config = SolverConfig::default();
        let not_cut = NOT_CUT
            .par_iter()
            .filter(|(x, t)| cut_locus_test(&group, &GroupPoint::new(x.to_vec(), vec![*t]), &config).verdict != Verdict::NotCut)
            .count();
        let ts = [0.5, -0.5, 1.0, -1.0, 2.0];
        let cut = ts
            .par_iter()
            .filter(|t| cut_locus_test(&group, &GroupPoint::new(vec![0.0, 0.0], vec![**t]), &config).verdict != Verdict::Cut)
            .count();
        vec![
            Check::count("misclassified points with x != 0", not_cut, NOT_CUT.len()),
            Check::count("misclassified points with x = 0", cut, ts.len()),
        ]
    })
}

/// `classify_gm` on two GM groups and on `N_{3,2}`.
pub fn criterion_classification(seed: u64) -> CriterionReport {
    timed(13, "GM classification heuristic", || {
        let mut checks = Vec::new();
        for name in ["heisenberg", "htype(4,3)"] {
            let c = match classify_gm(&fixture(name), 500, seed) {
                Ok(GmClassification::LikelyGM(f)) => Check {
                    passed: f >= 0.99,
                    measured: f,
                    tolerance: 0.99,
                    ..Check::count("", 0, 500)
                },
                Ok(GmClassification::NonGMEvidence(w)) => Check::count("", w.len(), 500).note("non-GM evidence reported"),
                Err(e) => failed("", &e),
            };
            checks.push(Check {
                name: format!("{name}: LikelyGM fraction >= 0.99"),
                ..c
            });
        }
        let found = match classify_gm(&fixture("n32"), 500, seed) {
            Ok(GmClassification::NonGMEvidence(w)) => w.len(),
            _ => 0,
        };
        checks.push(Check {
            passed: found > 0,
            ..Check::count("n32: non-GM witnesses found", found, 500)
        });
        checks
    })
}

/// Runs criterion `id` (1 to 13).
pub fn criterion(id: usize, seed: u64) -> Option<CriterionReport> {
    Some(match id {
        1 => criterion_heisenberg_grid(),
        2 => criterion_cut_axis(),
        3 => criterion_lower_bound(seed),
        4 => criterion_monotone(seed),
        5 => criterion_oracle_n32(seed),
        6 => criterion_bessel(seed),
        7 => criterion_concavity(seed),
        8 => criterion_relpk(),
        9 => criterion_positivity(seed),
        10 => criterion_varadhan(),
        11 => criterion_geodesics(seed),
        12 => criterion_cut_locus(),
        13 => criterion_classification(seed),
        _ => return None,
    })
}

/// Criteria making up each suite.
pub fn suite_criteria(suite: &str) -> Option<&'static [usize]> {
    Some(match suite {
        "bessel" => &[6],
        "concavity" => &[7],
        "bounds" => &[3, 4],
        "relpk" => &[8, 9],
        "varadhan" => &[10],
        "geodesic" => &[11],
        "cutlocus" => &[12, 13],
        "oracle-xcheck" => &[1, 2, 5],
        _ => return None,
    })
}

pub fn run_suite(suite: &str, seed: u64) -> Result<SuiteReport> {
    let ids = suite_criteria(suite).ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{suite}`; available: {}", SUITES.join(", "))))?;
    Ok(SuiteReport {
        suite: suite.into(),
        criteria: ids.iter().filter_map(|&id| criterion(id, seed)).collect(),
    })
}
