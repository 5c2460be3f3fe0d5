//! Normal geodesics: the exponential map, critical points of `Φ_{k,*}` and
//! their covectors, cut-locus verdicts and a sampled GM classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{first_zero, q_k, Q0_AT_ZERO};
use crate::error::{Error, Result};
use crate::group::{Covector, GroupPoint, StepTwoGroup};
use crate::linalg::{determinant, norm, norm2, solve, Matrix};
use crate::matfun::{exp_u_tilde, spectral, EvenKernel};
use crate::optimize::{distance, extend_chain, inner_sup, InnerStatus, SolverConfig};
use crate::oracle::{covector_distance, shooting_distance};
use crate::reference::{phi_k_star, stack, unstack, SegmentVector};

type Group = StepTwoGroup<f64>;
type Point = GroupPoint<f64>;
type Cov = Covector<f64>;

/// Fixed RK4 step count per unit of `‖Ũ(τ)‖ / 2`.
pub const EXP_STEPS: usize = 256;

/// Endpoint at time 1 of the normal geodesic with initial covector `(ζ, τ)`,
/// together with the largest deviation of the horizontal speed from `|ζ|`.
pub fn exp_map_with_speed(group: &Group, zeta: &[f64], tau: &[f64]) -> Result<(Point, f64)> {
    group.check_horizontal(zeta)?;
    group.check_vertical(tau)?;
    let ut = group.u_tilde(tau)?;
    let unorm = spectral(group, tau)?.norm();
    let steps = EXP_STEPS * ((unorm / 2.0).ceil() as usize).max(1);
    let h = 1.0 / steps as f64;
    let q = group.q();
    let m = group.m();
    let a = ut.as_slice();
    let us: Vec<&[f64]> = group.matrices().iter().map(|u| u.as_slice()).collect();
    // state (x, u, t) packed in one vector
    let n = 2 * q + m;
    let field = |y: &[f64], out: &mut [f64]| {
        let (x, u) = (&y[..q], &y[q..2 * q]);
        out[..q].copy_from_slice(u);
        for i in 0..q {
            out[q + i] = -(0..q).map(|j| a[i * q + j] * u[j]).sum::<f64>();
        }
        for (l, ul) in us.iter().enumerate() {
            let mut b = 0.0;
            for i in 0..q {
                b += x[i] * (0..q).map(|j| ul[i * q + j] * u[j]).sum::<f64>();
            }
            out[2 * q + l] = 0.5 * b;
        }
    };
    let mut y = vec![0.0; n];
    y[q..2 * q].copy_from_slice(zeta);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let speed0 = norm(zeta);
    let mut dev: f64 = 0.0;
    for _ in 0..steps {
        field(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        field(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        dev = dev.max((norm(&y[q..2 * q]) - speed0).abs());
    }
    Ok((GroupPoint::new(y[..q].to_vec(), y[2 * q..].to_vec()), dev))
}

/// `exp(ζ, τ)`: the endpoint of the normal geodesic.
pub fn exp_map(group: &Group, zeta: &[f64], tau: &[f64]) -> Result<Point> {
    Ok(exp_map_with_speed(group, zeta, tau)?.0)
}

/// Euclidean distance between the coordinates of two points.
pub fn endpoint_residual(a: &Point, b: &Point) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .chain(a.t.iter().zip(&b.t))
        .map(|(p, r)| (p - r) * (p - r))
        .sum::<f64>()
        .sqrt()
}

/// Whether every singular value of `Ũ(θ)` avoids `{π, 2π, …}`.
pub fn in_v_set(group: &Group, theta: &[f64]) -> Result<bool> {
    let spec = spectral(group, theta)?;
    Ok(spec.beta.iter().all(|&b| {
        let r = b.sqrt() / std::f64::consts::PI;
        r.round() == 0.0 || (r - r.round()).abs() * std::f64::consts::PI > 1e-10
    }))
}

/// `x`-component of `exp(ζ, 2θ)`: `e^{−Ũ(θ)} (sin U(θ)/U(θ)) ζ`.
pub fn x_component_closed_form(group: &Group, zeta: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    group.check_horizontal(zeta)?;
    if !in_v_set(group, theta)? {
        return Err(Error::SingularTheta);
    }
    let spec = spectral(group, theta)?;
    let kv = EvenKernel::Sinc.eval_all(&spec.beta)?;
    let y = spec.project(zeta);
    let scaled: Vec<f64> = y.iter().zip(&kv.f).map(|(a, b)| a * b).collect();
    Ok(exp_u_tilde(&spec, -1.0, &spec.basis.matvec(&scaled)))
}

/// The covector `(ζ, 2θ)` of the normal geodesic attached to a critical point
/// `(s, θ)` of `Φ_{k,*}(g; ·, ·)`; `exp(ζ, 2θ) = g` and `|ζ|² = Φ_{k,*}`.
pub fn covector_from_critical(group: &Group, g: &Point, s: &[Vec<f64>], theta: &[f64], k: usize) -> Result<Cov> {
    let spec = spectral(group, theta)?;
    let q = group.q();
    let y = spec.project(&g.x);
    let sk_hat = if k >= 1 {
        let mut v = s[k - 1].clone();
        for _ in 0..k {
            v = spec.u_tilde.matvec(&v);
        }
        spec.project(&v)
    } else {
        vec![0.0; q]
    };
    let pi2 = std::f64::consts::PI.powi(2);
    let mut w = vec![0.0; q];
    for a in 0..q {
        let b = spec.beta[a];
        if k == 0 || b < 0.25 * pi2 {
            w[a] = EvenKernel::InvSinc.eval(b)?[0] * y[a];
        } else {
            // x = √2 (Q_0/Q_k)(−β) Ũ^{−k} s_k on this eigenspace, Ũ^{−1} = −Ũ/β
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            w[a] = std::f64::consts::SQRT_2 * Q0_AT_ZERO / q_k(k, -b)? * sign / b.powi(k as i32) * sk_hat[a];
        }
    }
    let zeta = exp_u_tilde(&spec, 1.0, &spec.basis.matvec(&w));
    Ok(Covector {
        zeta,
        tau: theta.iter().map(|v| 2.0 * v).collect(),
    })
}

/// Where a geodesic record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordSource {
    CriticalPoint(usize),
    Shooting,
}

/// A critical point `(s, θ)` of `Φ_{k,*}(g; ·, ·)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub s: SegmentVector,
    pub theta: Vec<f64>,
    pub value: f64,
    pub hess_det: f64,
    /// Largest absolute Hessian entry.
    pub hess_norm: f64,
}

impl CriticalPoint {
    pub fn dimension(&self) -> usize {
        self.s.iter().map(|v| v.len()).sum::<usize>() + self.theta.len()
    }

    /// `|det Hess| < 1e-10 · ‖Hess‖^dim`
    pub fn is_degenerate(&self) -> bool {
        self.hess_det.abs() < 1e-10 * self.hess_norm.powi(self.dimension() as i32)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicRecord {
    /// `(ζ, τ)` with endpoint `exp(ζ, τ)`, `τ = 2θ`.
    pub covector: Cov,
    pub energy: f64,
    pub endpoint: Point,
    pub endpoint_residual: f64,
    pub source: RecordSource,
    pub critical: Option<CriticalPoint>,
}

/// Newton iterations on `∇Φ_{k,*} = 0` with a line search on `|∇Φ|²`.
fn find_root(group: &Group, g: &Point, k: usize, z0: Vec<f64>, tol: f64, max_iter: usize) -> Option<(Vec<f64>, Matrix<f64>, f64)> {
    let q = group.q();
    let zmax = first_zero(k);
    let eval = |z: &[f64]| -> Option<(f64, Vec<f64>, Matrix<f64>)> {
        let (s, th) = unstack(z, k, q);
        let e = phi_k_star(group, g, &s, &th, k, 2).ok()?;
        let grad = e.gradient();
        Some((e.value, grad, e.hess?))
    };
    let mut z = z0;
    let (mut value, mut grad, mut hess) = eval(&z)?;
    for _ in 0..max_iter {
        let gn2 = norm2(&grad);
        if gn2.sqrt() <= tol {
            return Some((z, hess, value));
        }
        let newton = solve(&hess, &grad).ok().filter(|d| d.iter().all(|v| v.is_finite()));
        let lm = {
            let h2 = hess.matmul(&hess);
            let lam = 1e-6 * (1.0 + h2.max_abs());
            let mut a = h2;
            for i in 0..a.rows() {
                a[(i, i)] += lam;
            }
            solve(&a, &hess.matvec(&grad)).ok()
        };
        let mut moved = false;
        for d in [newton, lm].into_iter().flatten() {
            let dth: Vec<f64> = d[k * q..].to_vec();
            let dn = spectral(group, &dth).ok()?.norm();
            let th: Vec<f64> = z[k * q..].to_vec();
            let margin = zmax - spectral(group, &th).ok()?.norm();
            let mut alpha: f64 = if dn > 0.0 { (0.9 * margin / dn).min(1.0) } else { 1.0 };
            for _ in 0..40 {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
                if let Some((v, gr, h)) = eval(&trial) {
                    if norm2(&gr) < (1.0 - 1e-4 * alpha) * gn2 {
                        z = trial;
                        value = v;
                        grad = gr;
                        hess = h;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    (norm(&grad) <= tol).then_some((z, hess, value))
}

/// Normal geodesics from `o` to `g` with `θ ∈ Ω_k`, through the critical
/// points of `Φ_{k,*}(g; ·, ·)`. Roots are sought from `8(kq + m)` starts and
/// every record is re-verified with [`exp_map`]; an empty list means none
/// were found.
pub fn solve_geodesics(group: &Group, g: &Point, k: usize, config: &SolverConfig) -> Result<Vec<GeodesicRecord>> {
    group.check_point(g)?;
    if g.is_identity() {
        return Err(Error::InvalidArgument("geodesics are enumerated for g ≠ o".into()));
    }
    let q = group.q();
    let m = group.m();
    let dim = k * q + m;
    let scale = g.scale();
    let zmax = first_zero(k);
    let spread = (norm(&g.x) + g.t.iter().map(|v| v.abs().sqrt()).sum::<f64>()) / ((2 * k + 3) as f64).sqrt();
    let starts = 8 * dim;
    let tol = config.tol_grad * scale;
    let found: Vec<Option<(Vec<f64>, Matrix<f64>, f64)>> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let theta: Vec<f64> = if i == 0 {
                vec![0.0; m]
            } else {
                let dir: Vec<f64> = (0..m).map(|_| unit.sample(&mut rng)).collect();
                let dn = spectral(group, &dir).ok()?.norm().max(1e-300);
                let radius = 0.95 * zmax * rng.random::<f64>();
                dir.iter().map(|v| v * radius / dn).collect()
            };
            let s: SegmentVector = if i % 2 == 0 {
                let mut chain = Vec::new();
                for j in 0..k {
                    chain = extend_chain(group, g, &chain, &theta, j).ok()?;
                }
                chain
            } else {
                (0..k).map(|_| (0..q).map(|_| spread * unit.sample(&mut rng)).collect()).collect()
            };
            find_root(group, g, k, stack(&s, &theta), tol, config.max_iter)
        })
        .collect();
    let mut out: Vec<GeodesicRecord> = Vec::new();
    let accept = 1e-8 * (1.0 + g.euclidean_norm());
    for (z, hess, value) in found.into_iter().flatten() {
        let (s, theta) = unstack(&z, k, q);
        let Ok(covector) = covector_from_critical(group, g, &s, &theta, k) else {
            continue;
        };
        let endpoint = exp_map(group, &covector.zeta, &covector.tau)?;
        let residual = endpoint_residual(&endpoint, g);
        if residual > accept {
            log::warn!("critical point at level {k} failed the endpoint check: residual {residual:e}");
            continue;
        }
        if out.iter().any(|r| covector_distance(&r.covector, &covector) <= 1e-8) {
            continue;
        }
        out.push(GeodesicRecord {
            energy: norm2(&covector.zeta),
            covector,
            endpoint,
            endpoint_residual: residual,
            source: RecordSource::CriticalPoint(k),
            critical: Some(CriticalPoint {
                s,
                theta,
                value,
                hess_det: determinant(&hess),
                hess_norm: hess.max_abs(),
            }),
        });
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NotCut,
    Cut,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutLocusVerdict {
    pub verdict: Verdict,
    /// Level at which the critical points were enumerated.
    pub level: Option<usize>,
    pub critical_points: usize,
    /// Critical points whose value equals `d²`.
    pub minimizing: usize,
    pub hess_det: Option<f64>,
    /// Several minimax points are also critical points.
    pub classical_cut: bool,
    pub d2: Option<f64>,
    pub note: String,
}

impl CutLocusVerdict {
    fn unknown(note: &str) -> Self {
        CutLocusVerdict {
            verdict: Verdict::Unknown,
            level: None,
            critical_points: 0,
            minimizing: 0,
            hess_det: None,
            classical_cut: false,
            d2: None,
            note: note.into(),
        }
    }
}

/// Cut-locus membership of `g` from the critical points of `Φ_{k+1,*}`,
/// where `k` is the first level whose minimax is attained.
pub fn cut_locus_test(group: &Group, g: &Point, config: &SolverConfig) -> CutLocusVerdict {
    if g.is_identity() {
        return CutLocusVerdict::unknown("the identity is excluded");
    }
    let cert = match distance(group, g, config) {
        Ok(c) if c.attained => c,
        Ok(_) => return CutLocusVerdict::unknown("minimax not attained up to max_k"),
        Err(e) => return CutLocusVerdict::unknown(&format!("distance failed: {e}")),
    };
    let level = cert.k_used + 1;
    let records = match solve_geodesics(group, g, level, config) {
        Ok(r) => r,
        Err(e) => return CutLocusVerdict::unknown(&format!("critical point search failed: {e}")),
    };
    let d2 = cert.d2;
    let minimizing: Vec<&CriticalPoint> = records
        .iter()
        .filter_map(|r| r.critical.as_ref())
        .filter(|c| (c.value - d2).abs() <= 1e-8 * d2.max(1e-300))
        .collect();
    let mut out = CutLocusVerdict {
        verdict: Verdict::Unknown,
        level: Some(level),
        critical_points: records.len(),
        minimizing: minimizing.len(),
        hess_det: None,
        classical_cut: false,
        d2: Some(d2),
        note: format!("level k_used + 1 = {level} stands in for k > k_*"),
    };
    match minimizing.as_slice() {
        [] => out.note = "no critical point attains d²".into(),
        [c] => {
            out.hess_det = Some(c.hess_det);
            out.verdict = if c.is_degenerate() { Verdict::Cut } else { Verdict::NotCut };
        }
        _ => {
            out.verdict = Verdict::Cut;
            out.classical_cut = true;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GmClassification {
    /// Fraction of samples in `M`.
    LikelyGM(f64),
    /// Sampled points outside `M` where `d²` exceeds the level-0 bound.
    NonGMEvidence(Vec<Point>),
}

/// Witnesses needed before the search for non-GM evidence stops.
const EVIDENCE_TARGET: usize = 5;

/// Samples the box `[−1, 1]^{q+m}` and tests membership in `M` (interior
/// nondegenerate maximizer of `φ(g; ·)`). Samples outside `M` are checked
/// against the shooting oracle for a gap above the level-0 bound.
pub fn classify_gm(group: &Group, n_samples: usize, seed: u64) -> Result<GmClassification> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let config = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..n_samples)
        .map(|_| {
            GroupPoint::new(
                (0..group.q()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..group.m()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let inner: Vec<Result<(f64, bool)>> = points
        .par_iter()
        .map(|p| {
            let r = inner_sup(group, p, &[], 0, &config)?;
            Ok((r.value, r.status == InnerStatus::Interior && r.curvature > 1e-10 * p.scale()))
        })
        .collect();
    let mut hits = 0;
    let mut evidence = Vec::new();
    for (p, r) in points.iter().zip(inner) {
        let (lower, in_m) = r?;
        if in_m {
            hits += 1;
            continue;
        }
        if evidence.len() >= EVIDENCE_TARGET || p.is_identity() {
            continue;
        }
        if let Ok(shot) = shooting_distance(group, p, 12, seed) {
            if shot.energy > lower + 1e-3 * p.scale() {
                evidence.push(p.clone());
            }
        }
    }
    if evidence.is_empty() {
        Ok(GmClassification::LikelyGM(hits as f64 / n_samples as f64))
    } else {
        Ok(GmClassification::NonGMEvidence(evidence))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin_group;
    use crate::linalg::norm2;
    use std::f64::consts::PI;

    fn heis() -> Group {
        builtin_group("heisenberg(1)").unwrap()
    }

    #[test]
    fn straight_line_when_tau_vanishes() {
        let g = heis();
        let p = exp_map(&g, &[0.3, -0.7], &[0.0]).unwrap();
        assert!((p.x[0] - 0.3).abs() < 1e-13 && (p.x[1] + 0.7).abs() < 1e-13 && p.t[0].abs() < 1e-13);
    }

    #[test]
    fn heisenberg_endpoint_and_speed() {
        let g = heis();
        let theta = PI / 2.0;
        let (p, dev) = exp_map_with_speed(&g, &[1.0, 0.0], &[2.0 * theta]).unwrap();
        assert!((norm(&p.x) - 2.0 / PI).abs() < 1e-10);
        assert!(dev < 1e-10);
        let xc = x_component_closed_form(&g, &[1.0, 0.0], &[theta]).unwrap();
        assert!((xc[0] - p.x[0]).abs() < 1e-10 && (xc[1] - p.x[1]).abs() < 1e-10);
        assert!(matches!(x_component_closed_form(&g, &[1.0, 0.0], &[PI]), Err(Error::SingularTheta)));
    }

    #[test]
    fn covector_round_trip_level_zero() {
        let g = heis();
        let p = GroupPoint::new(vec![1.0, 0.0], vec![PI / 8.0]);
        let c = covector_from_critical(&g, &p, &[], &[PI / 2.0], 0).unwrap();
        assert!((norm2(&c.zeta) - PI * PI / 4.0).abs() < 1e-12);
        let e = exp_map(&g, &c.zeta, &c.tau).unwrap();
        assert!((e.x[0] - 1.0).abs() < 1e-9 && e.x[1].abs() < 1e-9, "{e:?}");
        assert!((e.t[0] - PI / 8.0).abs() < 1e-9, "{e:?}");
    }
}
