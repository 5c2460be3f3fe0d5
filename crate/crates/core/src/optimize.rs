//! The distance engine: concave maximization over `Ω_k`, minimization of the
//! resulting envelope over `s`, and the level-by-level algorithm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bessel::{first_zero, q_ratios};
use crate::error::{Error, Result};
use crate::group::{Covector, GroupPoint, StepTwoGroup};
use crate::linalg::{dot, norm, solve, Matrix, SymEigen};
use crate::matfun::spectral;
use crate::reference::{f_k_map, phi_k_derivatives, phi_k_star, unstack, SegmentVector};

type Group = StepTwoGroup<f64>;
type Point = GroupPoint<f64>;
type Mat = Matrix<f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_k: usize,
    /// Inner stationarity tolerance, relative to the point scale.
    pub tol_grad: f64,
    /// Outer stationarity tolerance, relative to the point scale.
    pub tol_outer: f64,
    /// Relative margin below which an inner iterate counts as on the boundary.
    pub tol_boundary: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop the multistart once this many starts attain the same value.
    pub consensus: usize,
    /// Accept a non-attained level whose value matches the previous level.
    pub accept_stable_levels: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_k: 8,
            tol_grad: 1e-10,
            tol_outer: 1e-7,
            tol_boundary: 1e-6,
            restarts: 16,
            seed: 0,
            max_iter: 200,
            consensus: 4,
            accept_stable_levels: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerStatus {
    Interior,
    Boundary,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub status: InnerStatus,
    pub iterations: usize,
    pub grad_norm: f64,
    pub margin: f64,
    /// Smallest eigenvalue of `−Hess_τ` at the final iterate.
    pub curvature: f64,
}

/// Value, τ-gradient, τ-Hessian and domain margin of a concave objective.
type Eval = (f64, Vec<f64>, Mat, f64);

/// `ln det(I − S(τ)/Z²)` with its `τ`-gradient and Hessian; concave in `τ`
/// on `Ω_k` because `Z² I − ŨᵀŨ ≻ 0` is a linear matrix inequality.
fn log_det_barrier(group: &Group, tau: &[f64], z2: f64) -> Result<(f64, Vec<f64>, Mat)> {
    let spec = spectral(group, tau)?;
    let q = group.q();
    let m = group.m();
    let gap: Vec<f64> = spec.beta.iter().map(|b| z2 - b).collect();
    if gap.iter().any(|g| *g <= 0.0) {
        return Err(Error::DomainViolation {
            index: 0,
            value: spec.norm().powi(2),
            limit: z2,
        });
    }
    let value = gap.iter().map(|g| (g / z2).ln()).sum();
    let d1: Vec<f64> = gap.iter().map(|g| -1.0 / g).collect();
    let v = &spec.basis;
    let ut = &spec.u_tilde;
    let u = group.matrices();
    // E_i = U⁽ⁱ⁾ᵀŨ + ŨᵀU⁽ⁱ⁾ in the eigenbasis
    let e: Vec<Mat> = u
        .iter()
        .map(|ui| {
            let a = ui.transpose().matmul(ut);
            let full = a.add(&a.transpose());
            v.transpose().matmul(&full).matmul(v)
        })
        .collect();
    let grad = (0..m).map(|i| (0..q).map(|a| d1[a] * e[i][(a, a)]).sum()).collect();
    let f1 = Matrix::from_fn(q, q, |a, b| {
        let (ba, bb) = (spec.beta[a], spec.beta[b]);
        if (ba - bb).abs() <= 1e-4 * (1.0 + ba.abs().max(bb.abs())) {
            0.5 * (d1[a] + d1[b])
        } else {
            (gap[a].ln() - gap[b].ln()) / (ba - bb)
        }
    });
    let mut hess = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let c = u[i].transpose().matmul(&u[j]);
            let c = v.transpose().matmul(&c.add(&c.transpose())).matmul(v);
            let mut h: f64 = (0..q).map(|a| d1[a] * c[(a, a)]).sum();
            for a in 0..q {
                for b in 0..q {
                    h += f1[(a, b)] * e[i][(a, b)] * e[j][(b, a)];
                }
            }
            hess[(i, j)] = h;
            hess[(j, i)] = h;
        }
    }
    Ok((value, grad, hess))
}

/// Maximizes a concave function of `τ ∈ Ω_k`. Plain damped Newton is tried
/// first; when it ends on the boundary the log-det barrier path is followed
/// to the supremum of the closure and the better result is kept.
fn maximize_over_omega(
    group: &Group,
    k: usize,
    start: &[f64],
    scale: f64,
    config: &SolverConfig,
    f: impl Fn(&[f64], usize) -> Result<Eval>,
) -> Result<InnerResult> {
    let plain = newton_ascent(group, k, start, scale, config, &f)?;
    if plain.status == InnerStatus::Interior {
        return Ok(plain);
    }
    let z2 = first_zero(k).powi(2);
    let mut tau = vec![0.0; group.m()];
    let mut mu = 0.1 * scale;
    let stage_config = SolverConfig {
        max_iter: 50,
        ..config.clone()
    };
    while mu > 1e-9 * scale {
        let barrier = |t: &[f64], order: usize| -> Result<Eval> {
            let (v, g, h, margin) = f(t, order)?;
            let (bv, bg, bh) = log_det_barrier(group, t, z2)?;
            let g = g.iter().zip(&bg).map(|(a, b)| a + mu * b).collect();
            let mut h = h;
            h.axpy(mu, &bh);
            Ok((v + mu * bv, g, h, margin))
        };
        let stage_config = SolverConfig {
            tol_grad: config.tol_grad.max(1e-3 * mu / scale),
            ..stage_config.clone()
        };
        tau = newton_ascent(group, k, &tau, scale, &stage_config, &barrier)?.theta;
        mu *= 0.1;
    }
    let path = newton_ascent(group, k, &tau, scale, config, &f)?;
    Ok(if path.value > plain.value || path.status == InnerStatus::Interior {
        path
    } else {
        plain
    })
}

/// Damped Newton ascent on a concave function of `τ ∈ Ω_k`, with a
/// fraction-to-boundary rule and Armijo backtracking.
fn newton_ascent(group: &Group, k: usize, start: &[f64], scale: f64, config: &SolverConfig, f: &impl Fn(&[f64], usize) -> Result<Eval>) -> Result<InnerResult> {
    let z = first_zero(k);
    let m = group.m();
    let mut tau = start.to_vec();
    let mut cur = match f(&tau, 2) {
        Ok(e) => e,
        Err(Error::DomainViolation { .. }) => {
            tau = vec![0.0; m];
            f(&tau, 2)?
        }
        Err(e) => return Err(e),
    };
    let tol = config.tol_grad * scale;
    for it in 0..config.max_iter {
        let (value, grad, hess, margin) = &cur;
        let gn = norm(grad);
        let neg = hess.scale(-1.0);
        let eig = SymEigen::new(&neg)?;
        let curvature = eig.min_value();
        let finish = |status| InnerResult {
            theta: tau.clone(),
            value: *value,
            status,
            iterations: it,
            grad_norm: gn,
            margin: *margin,
            curvature,
        };
        if gn <= tol {
            let status = if *margin >= config.tol_boundary * z {
                InnerStatus::Interior
            } else {
                InnerStatus::Boundary
            };
            return Ok(finish(status));
        }
        let reg = 1e-10 * (1.0 + neg.max_abs());
        let shift = if curvature < reg { reg - curvature } else { 0.0 };
        let mut sys = neg.clone();
        for i in 0..m {
            sys[(i, i)] += shift;
        }
        let d = solve(&sys, grad)?;
        let slope = dot(grad, &d);
        let dn = spectral(group, &d)?.norm();
        let mut alpha = if dn > 0.0 { (0.95 * margin / dn).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = tau.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            match f(&trial, 2) {
                Ok(e) if e.3 >= 0.05 * margin && e.0 >= value + 1e-4 * alpha * slope - 1e-14 * (1.0 + value.abs()) => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) | Err(Error::DomainViolation { .. }) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, e)) = accepted else {
            // no ascent possible at rounding level
            let status = if *margin < config.tol_boundary * z {
                InnerStatus::Boundary
            } else if gn <= 1e-6 * scale {
                InnerStatus::Interior
            } else {
                InnerStatus::MaxIter
            };
            return Ok(finish(status));
        };
        let gain = e.0 - value;
        tau = trial;
        cur = e;
        if cur.3 < config.tol_boundary * z && slope > 0.0 && gain <= 1e-12 * (1.0 + cur.0.abs()) {
            let (value, grad, hess, margin) = &cur;
            let curvature = SymEigen::new(&hess.scale(-1.0))?.min_value();
            return Ok(InnerResult {
                theta: tau,
                value: *value,
                status: InnerStatus::Boundary,
                iterations: it + 1,
                grad_norm: norm(grad),
                margin: *margin,
                curvature,
            });
        }
    }
    let (value, grad, _, margin) = &cur;
    Ok(InnerResult {
        theta: tau.clone(),
        value: *value,
        status: InnerStatus::MaxIter,
        iterations: config.max_iter,
        grad_norm: norm(grad),
        margin: *margin,
        curvature: 0.0,
    })
}

fn tau_block(h: &Mat, offset: usize, m: usize) -> Mat {
    Matrix::from_fn(m, m, |i, j| h[(offset + i, offset + j)])
}

/// `sup_{τ ∈ Ω_k} Φ_{k,*}(g; s, τ)` starting from `τ = 0`.
pub fn inner_sup(group: &Group, g: &Point, s: &[Vec<f64>], k: usize, config: &SolverConfig) -> Result<InnerResult> {
    inner_sup_from(group, g, s, k, config, &vec![0.0; group.m()])
}

/// As [`inner_sup`], warm started at `start`.
pub fn inner_sup_from(group: &Group, g: &Point, s: &[Vec<f64>], k: usize, config: &SolverConfig, start: &[f64]) -> Result<InnerResult> {
    let q = group.q();
    let m = group.m();
    let run = |from: &[f64]| {
        maximize_over_omega(group, k, from, g.scale(), config, |tau, order| {
            let e = phi_k_star(group, g, s, tau, k, order)?;
            let h = e.hess.as_ref().map(|h| tau_block(h, k * q, m)).unwrap_or_else(|| Matrix::zeros(m, m));
            Ok((e.value, e.grad_tau, h, e.boundary_margin))
        })
    };
    let warm = run(start)?;
    if warm.status == InnerStatus::Interior || start.iter().all(|v| *v == 0.0) {
        return Ok(warm);
    }
    let cold = run(&vec![0.0; m])?;
    Ok(if cold.value >= warm.value { cold } else { warm })
}

/// Maximizes `φ_k((X, T); ·)` over `Ω_k`.
pub fn inner_sup_phi_k(group: &Group, big_x: &[f64], big_t: &[f64], k: usize, config: &SolverConfig) -> Result<InnerResult> {
    let z = first_zero(k);
    let scale = 1.0 + dot(big_x, big_x) + big_t.iter().map(|v| v.abs()).sum::<f64>();
    maximize_over_omega(group, k, &vec![0.0; group.m()], scale, config, |tau, _| {
        let (v, g, h) = phi_k_derivatives(group, big_x, big_t, tau, k)?;
        let margin = z - spectral(group, tau)?.norm();
        Ok((v, g, h, margin))
    })
}

/// Result of `inf_s sup_τ Φ_{k,*}(g; s, τ)` at one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterResult {
    pub k: usize,
    pub s_star: SegmentVector,
    pub theta_star: Vec<f64>,
    pub value: f64,
    pub attained: bool,
    pub inner_status: InnerStatus,
    pub grad_norm: f64,
    pub starts: usize,
    pub spread: f64,
    pub iterations: usize,
}

/// Appends `s_{k+1} = (Q_{k+1}/Q_k)(−S(θ)) Ũ(θ) s_k` (with `s_0 = x/√2`),
/// the level-(k+1) critical point over the new segment at fixed `θ`.
pub fn extend_chain(group: &Group, g: &Point, s: &[Vec<f64>], theta: &[f64], k: usize) -> Result<SegmentVector> {
    let spec = spectral(group, theta)?;
    let last: Vec<f64> = match s.last() {
        Some(v) => v.clone(),
        None => g.x.iter().map(|v| v / std::f64::consts::SQRT_2).collect(),
    };
    let y = spec.project(&spec.u_tilde.matvec(&last));
    let mut scaled = vec![0.0; y.len()];
    for (a, &b) in spec.beta.iter().enumerate() {
        scaled[a] = q_ratios(k, -b, 1)?[0] * y[a];
    }
    let mut out = s.to_vec();
    out.push(spec.basis.matvec(&scaled));
    Ok(out)
}

/// Envelope Hessian `H_ss − H_sτ H_ττ⁻¹ H_τs` at an interior maximizer.
fn reduced_hessian(h: &Mat, n: usize, m: usize) -> Result<Mat> {
    let htt = tau_block(h, n, m);
    let mut out = Matrix::from_fn(n, n, |i, j| h[(i, j)]);
    for j in 0..n {
        let col: Vec<f64> = (0..m).map(|i| h[(n + i, j)]).collect();
        let w = solve(&htt, &col)?;
        for i in 0..n {
            let hs: f64 = (0..m).map(|l| h[(i, n + l)] * w[l]).sum();
            out[(i, j)] -= hs;
        }
    }
    out.symmetrize();
    Ok(out)
}

fn flat(s: &[Vec<f64>]) -> Vec<f64> {
    s.iter().flatten().copied().collect()
}

struct StartOutcome {
    s: SegmentVector,
    inner: InnerResult,
    grad_norm: f64,
    attained: bool,
    iterations: usize,
}

/// Newton descent on `H(s) = sup_τ Φ_{k,*}` from one start, with compass
/// steps where the envelope gradient is unavailable.
fn descend(group: &Group, g: &Point, k: usize, s0: SegmentVector, theta0: &[f64], step0: f64, config: &SolverConfig) -> Result<StartOutcome> {
    let q = group.q();
    let m = group.m();
    let n = k * q;
    let scale = g.scale();
    let tol = config.tol_outer * scale;
    let mut s = s0;
    let mut r = inner_sup_from(group, g, &s, k, config, theta0)?;
    let mut step = step0.max(1e-3);
    let mut grad_norm = f64::INFINITY;
    for it in 0..config.max_iter {
        if r.status == InnerStatus::Interior {
            let e = phi_k_star(group, g, &s, &r.theta, k, 2)?;
            let gs = flat(&e.grad_s);
            grad_norm = norm(&gs);
            if grad_norm <= tol {
                return Ok(StartOutcome {
                    s,
                    inner: r,
                    grad_norm,
                    attained: true,
                    iterations: it,
                });
            }
            let hred = reduced_hessian(e.hess.as_ref().expect("order 2"), n, m);
            if let Ok(mut hred) = hred {
                let eig = SymEigen::new(&hred)?;
                let floor = 1e-8 * (1.0 + hred.max_abs());
                if eig.min_value() < floor {
                    let shift = floor - eig.min_value();
                    for i in 0..n {
                        hred[(i, i)] += shift;
                    }
                }
                let d: Vec<f64> = solve(&hred, &gs)?.iter().map(|v| -v).collect();
                let slope = dot(&gs, &d);
                let mut alpha = 1.0;
                let mut moved = false;
                let z = flat(&s);
                for _ in 0..40 {
                    let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                    let (ts, _) = unstack(&stack_tau(&trial, m), k, q);
                    let r2 = inner_sup_from(group, g, &ts, k, config, &r.theta)?;
                    if r2.value <= r.value + 1e-4 * alpha * slope + 1e-14 * (1.0 + r.value.abs()) {
                        s = ts;
                        r = r2;
                        moved = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if moved {
                    continue;
                }
                if grad_norm <= 1e3 * tol {
                    return Ok(StartOutcome {
                        s,
                        inner: r,
                        grad_norm,
                        attained: true,
                        iterations: it,
                    });
                }
            }
        }
        // compass search
        let z = flat(&s);
        let mut improved = false;
        'dirs: for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut trial = z.clone();
                trial[i] += sign * step;
                let (ts, _) = unstack(&stack_tau(&trial, m), k, q);
                let r2 = inner_sup_from(group, g, &ts, k, config, &r.theta)?;
                if r2.value < r.value - 1e-14 * (1.0 + r.value.abs()) {
                    s = ts;
                    r = r2;
                    improved = true;
                    step *= 2.0;
                    break 'dirs;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-9 * (1.0 + norm(&z)) {
                break;
            }
        }
    }
    Ok(StartOutcome {
        s,
        inner: r,
        grad_norm,
        attained: false,
        iterations: config.max_iter,
    })
}

fn stack_tau(z: &[f64], m: usize) -> Vec<f64> {
    let mut v = z.to_vec();
    v.extend(std::iter::repeat_n(0.0, m));
    v
}

/// `Φ̲_{k,*}(g) = inf_s sup_τ Φ_{k,*}(g; s, τ)` by multistart.
pub fn outer_inf(group: &Group, g: &Point, k: usize, config: &SolverConfig) -> Result<OuterResult> {
    outer_inf_warm(group, g, k, config, None)
}

/// As [`outer_inf`]; `previous` is the level-(k−1) result whose chain
/// extension is tried first. When that start attains the previous value the
/// multistart is skipped, since level values never decrease.
pub fn outer_inf_warm(group: &Group, g: &Point, k: usize, config: &SolverConfig, previous: Option<&OuterResult>) -> Result<OuterResult> {
    group.check_point(g)?;
    let scale = g.scale();
    if k == 0 {
        let r = inner_sup(group, g, &[], 0, config)?;
        return Ok(OuterResult {
            k,
            s_star: Vec::new(),
            theta_star: r.theta,
            value: r.value,
            attained: r.status == InnerStatus::Interior,
            inner_status: r.status,
            grad_norm: 0.0,
            starts: 1,
            spread: 0.0,
            iterations: r.iterations,
        });
    }
    let q = group.q();
    let m = group.m();
    let sigma = (norm(&g.x) + g.t.iter().map(|v| v.abs().sqrt()).sum::<f64>()) / ((2 * k + 3) as f64).sqrt();
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut starts: Vec<(SegmentVector, Vec<f64>)> = Vec::new();
    if let Some(prev) = previous {
        if prev.k + 1 == k && prev.inner_status == InnerStatus::Interior {
            if let Ok(chain) = extend_chain(group, g, &prev.s_star, &prev.theta_star, prev.k) {
                starts.push((chain, prev.theta_star.clone()));
            }
        }
    }
    starts.push((vec![vec![0.0; q]; k], vec![0.0; m]));
    let mut outcomes: Vec<StartOutcome> = Vec::new();
    let mut iterations = 0;
    let mut idx = 0;
    let total = starts.len() + config.restarts;
    while idx < total {
        let (s0, th0) = if idx < starts.len() {
            starts[idx].clone()
        } else {
            let s: SegmentVector = (0..k).map(|_| (0..q).map(|_| normal.sample(&mut rng)).collect()).collect();
            (s, vec![0.0; m])
        };
        let warm = idx == 0 && previous.is_some() && starts.len() > 1;
        idx += 1;
        let out = match descend(group, g, k, s0, &th0, 0.25 * sigma, config) {
            Ok(o) => o,
            Err(Error::EigenFailure) | Err(Error::NumericalBreakdown(_)) => continue,
            Err(e) => return Err(e),
        };
        iterations += out.iterations;
        if warm {
            if let Some(prev) = previous {
                if out.attained && out.inner.value <= prev.value + 1e-9 * scale {
                    outcomes.push(out);
                    break;
                }
            }
        }
        outcomes.push(out);
        let best_att = outcomes.iter().filter(|o| o.attained).map(|o| o.inner.value).fold(f64::INFINITY, f64::min);
        let agree = outcomes
            .iter()
            .filter(|o| o.attained && (o.inner.value - best_att).abs() <= 1e-9 * scale)
            .count();
        if config.consensus > 0 && agree >= config.consensus {
            break;
        }
    }
    if outcomes.is_empty() {
        return Err(Error::NumericalBreakdown("every start failed".into()));
    }
    let values: Vec<f64> = outcomes.iter().map(|o| o.inner.value).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_all = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.inner.value.total_cmp(&b.1.inner.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let best_att = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.attained)
        .min_by(|a, b| a.1.inner.value.total_cmp(&b.1.inner.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let pick = match best_att {
        Some(i) if outcomes[i].inner.value <= lo + 1e-7 * scale => i,
        _ => best_all,
    };
    let o = &outcomes[pick];
    Ok(OuterResult {
        k,
        s_star: o.s.clone(),
        theta_star: o.inner.theta.clone(),
        value: o.inner.value,
        attained: o.attained,
        inner_status: o.inner.status,
        grad_norm: o.grad_norm,
        starts: outcomes.len(),
        spread: hi - lo,
        iterations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub k: usize,
    pub value: f64,
    pub attained: bool,
    pub inner_status: InnerStatus,
    pub starts: usize,
    pub spread: f64,
    pub iterations: usize,
}

impl From<&OuterResult> for LevelSummary {
    fn from(r: &OuterResult) -> Self {
        Self {
            k: r.k,
            value: r.value,
            attained: r.attained,
            inner_status: r.inner_status,
            starts: r.starts,
            spread: r.spread,
            iterations: r.iterations,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub levels: Vec<LevelSummary>,
    /// Termination through equal values at consecutive levels.
    pub stable_level: bool,
    pub endpoint_residual: Option<f64>,
    pub upper_source: String,
}

/// Squared distance with the level used, the minimax witnesses and a bracket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceCertificate {
    pub d2: f64,
    pub k_used: usize,
    pub s_star: SegmentVector,
    pub theta_star: Vec<f64>,
    pub attained: bool,
    pub lower: f64,
    pub upper: f64,
    /// `(ζ, 2θ*)` of a minimizing geodesic, so that `exp(ζ, 2θ*) = g`.
    pub covector: Option<Covector<f64>>,
    pub diagnostics: Diagnostics,
}

/// Level values `Φ̲_{k,*}(g)` for `k = 0..=k_max`, each level warm started
/// from the previous one.
pub fn level_values(group: &Group, g: &Point, k_max: usize, config: &SolverConfig) -> Result<Vec<OuterResult>> {
    let mut out: Vec<OuterResult> = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let r = outer_inf_warm(group, g, k, config, out.last())?;
        out.push(r);
    }
    Ok(out)
}

/// Runs levels `k = 0, 1, …` until the minimax is attained.
pub fn distance(group: &Group, g: &Point, config: &SolverConfig) -> Result<DistanceCertificate> {
    group.check_point(g)?;
    if !g.is_finite() {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    let q = group.q();
    let m = group.m();
    if g.is_identity() {
        return Ok(DistanceCertificate {
            d2: 0.0,
            k_used: 0,
            s_star: Vec::new(),
            theta_star: vec![0.0; m],
            attained: true,
            lower: 0.0,
            upper: 0.0,
            covector: Some(Covector {
                zeta: vec![0.0; q],
                tau: vec![0.0; m],
            }),
            diagnostics: Diagnostics {
                upper_source: "identity".into(),
                ..Default::default()
            },
        });
    }
    let mut diag = Diagnostics::default();
    let mut levels: Vec<OuterResult> = Vec::new();
    let mut lower = f64::NEG_INFINITY;
    for k in 0..=config.max_k {
        let r = outer_inf_warm(group, g, k, config, levels.last())?;
        diag.levels.push(LevelSummary::from(&r));
        lower = lower.max(r.value);
        let stable = !r.attained && config.accept_stable_levels && levels.last().is_some_and(|p| (r.value - p.value).abs() <= 1e-8 * p.value.abs().max(1.0));
        if r.attained || stable {
            diag.stable_level = stable;
            let (covector, upper, residual, source) = certify_upper(group, g, &r)?;
            diag.endpoint_residual = residual;
            diag.upper_source = source;
            return Ok(DistanceCertificate {
                d2: r.value,
                k_used: k,
                s_star: r.s_star,
                theta_star: r.theta_star,
                attained: true,
                lower,
                upper: upper.max(r.value),
                covector,
                diagnostics: diag,
            });
        }
        levels.push(r);
    }
    let last = levels.pop().expect("at least one level");
    let (upper, source) = match crate::oracle::shooting_distance(group, g, 12, config.seed) {
        Ok(sh) => (sh.energy.max(lower), "shooting".to_string()),
        Err(_) => (f64::INFINITY, "none".to_string()),
    };
    diag.upper_source = source;
    Ok(DistanceCertificate {
        d2: lower,
        k_used: last.k,
        s_star: last.s_star,
        theta_star: last.theta_star,
        attained: false,
        lower,
        upper,
        covector: None,
        diagnostics: diag,
    })
}

/// Geodesic energy for the critical point of an attained level, checked by
/// integrating the exponential map.
fn certify_upper(group: &Group, g: &Point, r: &OuterResult) -> Result<(Option<Covector<f64>>, f64, Option<f64>, String)> {
    let tol = 1e-6 * (1.0 + g.euclidean_norm());
    if let Ok(c) = crate::geodesics::covector_from_critical(group, g, &r.s_star, &r.theta_star, r.k) {
        let e = crate::geodesics::exp_map(group, &c.zeta, &c.tau)?;
        let res = crate::geodesics::endpoint_residual(&e, g);
        if res <= tol {
            let energy = dot(&c.zeta, &c.zeta);
            return Ok((Some(c), energy, Some(res), "critical point".into()));
        }
        if let Ok(refined) = crate::oracle::refine_covector(group, g, &c) {
            let e = crate::geodesics::exp_map(group, &refined.zeta, &refined.tau)?;
            let res = crate::geodesics::endpoint_residual(&e, g);
            if res <= tol {
                let energy = dot(&refined.zeta, &refined.zeta);
                return Ok((Some(refined), energy, Some(res), "refined shooting".into()));
            }
        }
    }
    Ok((None, f64::INFINITY, None, "none".into()))
}

/// `Φ̲_{k,*}(g)`, a lower bound for `d(g)²` up to optimization accuracy.
pub fn lower_bound(group: &Group, g: &Point, k: usize, config: &SolverConfig) -> Result<f64> {
    Ok(level_values(group, g, k, config)?[k].value)
}

/// `Φ̲̄_{k,*}(g; s)` when `F_k(x, t, s)` admits an interior nondegenerate
/// maximizer of `φ_k`; at level 0 the test is applied to `g` itself.
pub fn upper_bound_if_in_mk(group: &Group, g: &Point, s: &[Vec<f64>], k: usize, config: &SolverConfig) -> Option<f64> {
    let (big_x, big_t) = if k == 0 {
        (g.x.clone(), g.t.clone())
    } else {
        f_k_map(group, &g.x, &g.t, s).ok()?
    };
    let r = if k == 0 {
        inner_sup(group, g, &[], 0, config).ok()?
    } else {
        inner_sup_phi_k(group, &big_x, &big_t, k, config).ok()?
    };
    let scale = 1.0 + dot(&big_x, &big_x) + big_t.iter().map(|v| v.abs()).sum::<f64>();
    if r.status != InnerStatus::Interior || r.curvature <= 1e-8 * scale {
        return None;
    }
    if k == 0 {
        return Some(r.value);
    }
    let full = inner_sup(group, g, s, k, config).ok()?;
    (full.status == InnerStatus::Interior).then_some(full.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauRegion {
    /// `τ ∈ Ω_k`
    Inside,
    /// `τ ∈ Ω_{k+1} ∖ Ω̄_k`
    Between,
    /// `τ ∉ Ω_{k+1}`
    Outside,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimaxReport {
    pub region: TauRegion,
    pub level_value: f64,
    /// `inf_{s_{k+1}} Φ_{k+1,*}`, or the most negative value seen along the ray.
    pub next_level_value: f64,
    pub relative_gap: f64,
    pub divergent: bool,
    pub passed: bool,
}

/// Checks `inf_{s_{k+1}} Φ_{k+1,*}(g; s, s_{k+1}, τ) = Φ_{k,*}(g; s, τ)` inside
/// `Ω_k` and divergence to `−∞` in `Ω_{k+1} ∖ Ω̄_k`.
pub fn minimax_residual_check(group: &Group, g: &Point, s: &[Vec<f64>], tau: &[f64], k: usize) -> Result<MinimaxReport> {
    let q = group.q();
    let norm_u = spectral(group, tau)?.norm();
    let region = if norm_u < first_zero(k) {
        TauRegion::Inside
    } else if norm_u < first_zero(k + 1) {
        TauRegion::Between
    } else {
        TauRegion::Outside
    };
    let scale = g.scale();
    let level_value = match region {
        TauRegion::Inside => phi_k_star(group, g, s, tau, k, 0)?.value,
        _ => f64::NAN,
    };
    if region == TauRegion::Outside {
        return Ok(MinimaxReport {
            region,
            level_value,
            next_level_value: f64::NAN,
            relative_gap: f64::NAN,
            divergent: false,
            passed: false,
        });
    }
    // Φ_{k+1,*} is quadratic in s_{k+1}: one Newton step from 0 is exact.
    let mut ext = s.to_vec();
    ext.push(vec![0.0; q]);
    let e = phi_k_star(group, g, &ext, tau, k + 1, 2)?;
    let h = e.hess.expect("order 2");
    let off = k * q;
    let hb = Matrix::from_fn(q, q, |i, j| h[(off + i, off + j)]);
    let gb = &e.grad_s[k];
    let eig = SymEigen::new(&hb)?;
    if eig.min_value() > 1e-12 * (1.0 + hb.max_abs()) {
        let step = solve(&hb, gb)?;
        ext[k] = step.iter().map(|v| -v).collect();
        let v = phi_k_star(group, g, &ext, tau, k + 1, 0)?.value;
        let gap = (v - level_value).abs() / level_value.abs().max(1.0);
        return Ok(MinimaxReport {
            region,
            level_value,
            next_level_value: v,
            relative_gap: gap,
            divergent: false,
            passed: region == TauRegion::Inside && gap <= 1e-6,
        });
    }
    // negative curvature: follow the eigenvector to −∞
    let dir: Vec<f64> = (0..q).map(|i| eig.vectors[(i, 0)]).collect();
    let mut r = 1.0;
    let mut v = e.value;
    for _ in 0..80 {
        ext[k] = dir.iter().map(|d| r * d).collect();
        v = phi_k_star(group, g, &ext, tau, k + 1, 0)?.value;
        if v < -1e6 * scale {
            break;
        }
        r *= 2.0;
    }
    let divergent = v < -1e6 * scale;
    Ok(MinimaxReport {
        region,
        level_value,
        next_level_value: v,
        relative_gap: f64::NAN,
        divergent,
        passed: region == TauRegion::Between && divergent,
    })
}
