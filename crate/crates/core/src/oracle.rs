//! Brute-force distance estimators used for cross-checks: direct optimization
//! over piecewise-constant controls, covector shooting, and the Heisenberg
//! closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{endpoint_residual, exp_map, x_component_closed_form};
use crate::group::{Covector, GroupPoint, StepTwoGroup};
use crate::linalg::{dot, norm, norm2, solve, Matrix};
use crate::matfun::{exp_u_tilde, spectral, EvenKernel};
use crate::minimize::{lbfgs, levenberg_marquardt};

type Group = StepTwoGroup<f64>;
type Point = GroupPoint<f64>;
type Cov = Covector<f64>;

/// Piecewise-constant horizontal controls on `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlPath {
    pub u: Vec<Vec<f64>>,
    pub endpoint: Point,
    /// `∫|u|² = (1/N) Σ |u_i|²`
    pub energy: f64,
}

impl ControlPath {
    pub fn segments(&self) -> usize {
        self.u.len()
    }

    /// `(1/N) Σ |u_i|`
    pub fn length(&self) -> f64 {
        self.u.iter().map(|v| norm(v)).sum::<f64>() / self.u.len() as f64
    }

    /// `energy / length² ≥ 1`, with equality exactly at constant speed.
    pub fn energy_length_ratio(&self) -> f64 {
        self.energy / self.length().powi(2)
    }
}

/// Endpoint of the horizontal path driven by constant controls `u_i` on
/// consecutive intervals of length `1/N`: the product of the segments
/// `(u_i / N, 0)`.
pub fn integrate_controls(group: &Group, u: &[Vec<f64>]) -> Result<Point> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("at least one segment is required".into()));
    }
    let n = u.len() as f64;
    let mut p = group.identity();
    for ui in u {
        group.check_horizontal(ui)?;
        let seg = GroupPoint::new(ui.iter().map(|v| v / n).collect(), vec![0.0; group.m()]);
        p = group.multiply(&p, &seg)?;
    }
    Ok(p)
}

/// Endpoint and constraint data for displacement variables `d_i = u_i / N`.
struct Transcription<'a> {
    group: &'a Group,
    target: &'a Point,
    n: usize,
}

impl Transcription<'_> {
    /// Constraint residual `(x_N − x, T − t)` and the prefix sums `x_l`.
    fn residual(&self, d: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let q = self.group.q();
        let m = self.group.m();
        let mut x = vec![0.0; q];
        let mut t = vec![0.0; m];
        let mut prefix = Vec::with_capacity(self.n + 1);
        for l in 0..self.n {
            prefix.push(x.clone());
            let dl = &d[l * q..(l + 1) * q];
            for (tj, b) in t.iter_mut().zip(self.group.bracket(&x, dl)) {
                *tj += 0.5 * b;
            }
            for i in 0..q {
                x[i] += dl[i];
            }
        }
        prefix.push(x.clone());
        let mut c: Vec<f64> = x.iter().zip(&self.target.x).map(|(a, b)| a - b).collect();
        c.extend(t.iter().zip(&self.target.t).map(|(a, b)| a - b));
        (c, prefix)
    }

    /// `Jᵀ c` where `J` is the constraint Jacobian; the `t`-rows use
    /// `∂T_j/∂d_l = ½ U⁽ʲ⁾ ((x_N − x_{l+1}) − x_l)`.
    fn jt_times(&self, prefix: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
        let q = self.group.q();
        let ct = &c[q..];
        let uc = self.group.u_tilde(ct).expect("dimension checked");
        let xn = &prefix[self.n];
        let mut out = Vec::with_capacity(self.n * q);
        for l in 0..self.n {
            let v: Vec<f64> = (0..q).map(|i| xn[i] - prefix[l + 1][i] - prefix[l][i]).collect();
            let w = uc.matvec(&v);
            out.extend((0..q).map(|i| c[i] + 0.5 * w[i]));
        }
        out
    }

    fn jacobian(&self, prefix: &[Vec<f64>]) -> Matrix<f64> {
        let q = self.group.q();
        let m = self.group.m();
        let mut jac = Matrix::zeros(q + m, self.n * q);
        let xn = &prefix[self.n];
        for l in 0..self.n {
            let v: Vec<f64> = (0..q).map(|i| xn[i] - prefix[l + 1][i] - prefix[l][i]).collect();
            for i in 0..q {
                jac[(i, l * q + i)] = 1.0;
            }
            for (j, uj) in self.group.matrices().iter().enumerate() {
                let w = uj.matvec(&v);
                for i in 0..q {
                    jac[(q + j, l * q + i)] = 0.5 * w[i];
                }
            }
        }
        jac
    }

    /// Minimum-norm Gauss–Newton corrections onto the constraint set.
    fn project(&self, d: &mut [f64]) -> f64 {
        let tol = 1e-13 * (1.0 + self.target.euclidean_norm());
        let mut res = f64::INFINITY;
        for _ in 0..30 {
            let (c, prefix) = self.residual(d);
            res = norm(&c);
            if res <= tol {
                break;
            }
            let jac = self.jacobian(&prefix);
            let mut jjt = jac.matmul(&jac.transpose());
            let reg = 1e-14 * (1.0 + jjt.max_abs());
            for i in 0..jjt.rows() {
                jjt[(i, i)] += reg;
            }
            let Ok(y) = solve(&jjt, &c) else { break };
            let delta = jac.tmatvec(&y);
            for (a, b) in d.iter_mut().zip(delta) {
                *a -= b;
            }
        }
        res
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectResult {
    pub energy: f64,
    pub path: ControlPath,
    pub residual: f64,
    pub restarts: usize,
}

/// Newton iterations on the KKT system of `min N|d|²` subject to `c(d) = 0`.
/// The Lagrangian Hessian is `2N I` plus `±½ Ũ(λ_t)` on off-diagonal blocks.
fn sqp_polish(tr: &Transcription, d: &mut Vec<f64>) {
    let q = tr.group.q();
    let m = tr.group.m();
    let nv = tr.n * q;
    let nc = q + m;
    let nf = tr.n as f64;
    let tol = 1e-13 * (1.0 + tr.target.euclidean_norm());
    let merit = |z: &[f64], rho: f64| nf * norm2(z) + rho * norm(&tr.residual(z).0);
    for _ in 0..40 {
        let (c, prefix) = tr.residual(d);
        let jac = tr.jacobian(&prefix);
        let grad: Vec<f64> = d.iter().map(|v| 2.0 * nf * v).collect();
        // least-squares multipliers
        let mut jjt = jac.matmul(&jac.transpose());
        let reg = 1e-14 * (1.0 + jjt.max_abs());
        for i in 0..nc {
            jjt[(i, i)] += reg;
        }
        let Ok(lam) = solve(&jjt, &jac.matvec(&grad)) else { return };
        let lam: Vec<f64> = lam.iter().map(|v| -v).collect();
        let stat: Vec<f64> = grad.iter().zip(jac.tmatvec(&lam)).map(|(a, b)| a + b).collect();
        if norm(&c) <= tol && norm(&stat) <= 1e-11 * (1.0 + norm(&grad)) {
            return;
        }
        let ul = tr.group.u_tilde(&lam[q..]).expect("dimension checked");
        let mut kkt = Matrix::zeros(nv + nc, nv + nc);
        for i in 0..nv {
            kkt[(i, i)] = 2.0 * nf;
        }
        for bi in 0..tr.n {
            for bl in 0..tr.n {
                if bi == bl {
                    continue;
                }
                let sign = if bi < bl { 0.5 } else { -0.5 };
                for a in 0..q {
                    for b in 0..q {
                        kkt[(bi * q + a, bl * q + b)] = sign * ul[(a, b)];
                    }
                }
            }
        }
        for r in 0..nc {
            for j in 0..nv {
                kkt[(nv + r, j)] = jac[(r, j)];
                kkt[(j, nv + r)] = jac[(r, j)];
            }
        }
        let mut rhs: Vec<f64> = stat.iter().map(|v| -v).collect();
        rhs.extend(c.iter().map(|v| -v));
        let Ok(step) = solve(&kkt, &rhs) else { return };
        let rho = 2.0 * norm(&lam) + 1.0;
        let m0 = merit(d, rho);
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = d.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            if merit(&trial, rho) < m0 || alpha == 1.0 && norm(&tr.residual(&trial).0) < norm(&c) {
                *d = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            return;
        }
    }
}

fn direct_single(tr: &Transcription, d0: Vec<f64>) -> (Vec<f64>, f64) {
    let n = tr.n as f64;
    let mut d = d0;
    let mut mu = 10.0;
    let scale = 1.0 + tr.target.euclidean_norm();
    for _stage in 0..3 {
        let f = |z: &[f64]| {
            let (c, prefix) = tr.residual(z);
            let jc = tr.jt_times(&prefix, &c);
            let v = n * norm2(z) + mu * norm2(&c);
            let g: Vec<f64> = z.iter().zip(&jc).map(|(a, b)| 2.0 * n * a + 2.0 * mu * b).collect();
            (v, g)
        };
        d = lbfgs(f, &d, 500, 1e-8 * scale * n.sqrt()).x;
        mu *= 10.0;
    }
    sqp_polish(tr, &mut d);
    let res = tr.project(&mut d);
    (d, res)
}

/// Minimal energy of `N`-segment control paths reaching `g`: penalty
/// continuation with L-BFGS inner solves, then a feasibility projection.
/// The result bounds `d(g)²` from above up to discretization.
pub fn direct_distance(group: &Group, g: &Point, n: usize, restarts: usize, seed: u64) -> Result<DirectResult> {
    group.check_point(g)?;
    if n < 8 {
        return Err(Error::InvalidArgument("direct transcription needs N ≥ 8".into()));
    }
    let q = group.q();
    let tr = Transcription { group, target: g, n };
    let loop_scale = g.t.iter().map(|v| v.abs()).sum::<f64>().sqrt() * 1.5 + 0.1;
    let runs: Vec<(usize, Vec<f64>, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64 * 7919));
            let normal = Normal::new(0.0, loop_scale).expect("positive scale");
            let harmonics = 1 + r % 2;
            let coeffs: Vec<Vec<f64>> = (0..2 * harmonics).map(|_| (0..q).map(|_| normal.sample(&mut rng)).collect()).collect();
            let mut d0 = Vec::with_capacity(n * q);
            for l in 0..n {
                let s = (l as f64 + 0.5) / n as f64;
                for i in 0..q {
                    let mut u = g.x[i];
                    if r > 0 {
                        for h in 0..harmonics {
                            let w = 2.0 * std::f64::consts::PI * (h + 1) as f64 * s;
                            u += coeffs[2 * h][i] * w.cos() + coeffs[2 * h + 1][i] * w.sin();
                        }
                    }
                    d0.push(u / n as f64);
                }
            }
            let (d, res) = direct_single(&tr, d0);
            (r, d, res)
        })
        .collect();
    let tol = 1e-6 * (1.0 + g.euclidean_norm());
    let best = runs
        .iter()
        .filter(|(_, _, res)| *res <= tol)
        .min_by(|a, b| norm2(&a.1).total_cmp(&norm2(&b.1)).then(a.0.cmp(&b.0)))
        .or_else(|| runs.iter().min_by(|a, b| a.2.total_cmp(&b.2)))
        .ok_or(Error::NoneFound)?;
    let u: Vec<Vec<f64>> = best.1.chunks(q).map(|c| c.iter().map(|v| v * n as f64).collect()).collect();
    let endpoint = integrate_controls(group, &u)?;
    let energy = u.iter().map(|v| norm2(v)).sum::<f64>() / n as f64;
    let out = DirectResult {
        energy,
        path: ControlPath { u, endpoint, energy },
        residual: best.2,
        restarts: runs.len(),
    };
    if best.2 > tol {
        return Err(Error::Unconverged {
            estimate: energy,
            error: best.2,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingRecord {
    pub covector: Cov,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingResult {
    /// Smallest `|ζ|²` among converged covectors.
    pub energy: f64,
    pub covector: Cov,
    pub records: Vec<ShootingRecord>,
}

fn shoot_residual(group: &Group, g: &Point, z: &[f64]) -> Result<Vec<f64>> {
    let q = group.q();
    let e = exp_map(group, &z[..q], &z[q..])?;
    let mut r: Vec<f64> = e.x.iter().zip(&g.x).map(|(a, b)| a - b).collect();
    r.extend(e.t.iter().zip(&g.t).map(|(a, b)| a - b));
    Ok(r)
}

/// Solves `exp(ζ, τ) = g` by Levenberg–Marquardt from `c`.
pub fn refine_covector(group: &Group, g: &Point, c: &Cov) -> Result<Cov> {
    let q = group.q();
    let mut z = c.zeta.clone();
    z.extend_from_slice(&c.tau);
    let tol = 1e-12 * (1.0 + g.euclidean_norm());
    let sol = levenberg_marquardt(|v| shoot_residual(group, g, v), &z, 100, tol)?;
    if sol.residual > 1e-9 * (1.0 + g.euclidean_norm()) {
        return Err(Error::NoneFound);
    }
    Ok(Covector {
        zeta: sol.x[..q].to_vec(),
        tau: sol.x[q..].to_vec(),
    })
}

/// Inverts the `x`-formula at a trial `θ`: `ζ = (U/sin U)(θ) e^{Ũ(θ)} x`.
fn zeta_from_theta(group: &Group, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
    let spec = spectral(group, theta).ok()?;
    let kv = EvenKernel::InvSinc.eval_all(&spec.beta).ok()?;
    let y = spec.project(x);
    let w: Vec<f64> = y.iter().zip(&kv.f).map(|(a, b)| a * b).collect();
    let z = exp_u_tilde(&spec, 1.0, &spec.basis.matvec(&w));
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// Smallest energy among normal geodesics reaching `g`, by multistart
/// shooting; `starts` trial values of `θ` are drawn besides `θ = 0`.
pub fn shooting_distance(group: &Group, g: &Point, starts: usize, seed: u64) -> Result<ShootingResult> {
    group.check_point(g)?;
    if g.is_identity() {
        return Err(Error::InvalidArgument("shooting needs g ≠ o".into()));
    }
    let q = group.q();
    let m = group.m();
    let scale = g.scale();
    let tnorm = norm(&g.t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut trials: Vec<Vec<f64>> = vec![{
        let mut z = g.x.clone();
        z.extend(std::iter::repeat_n(0.0, m));
        z
    }];
    for i in 0..starts {
        let radius = std::f64::consts::PI * (0.15 + 1.7 * (i as f64 + 0.5) / starts.max(1) as f64);
        let mut dir: Vec<f64> = (0..m).map(|_| unit.sample(&mut rng)).collect();
        if tnorm > 0.0 && i % 2 == 0 {
            for (d, t) in dir.iter_mut().zip(&g.t) {
                *d = *d * 0.3 + t / tnorm;
            }
        }
        let dn = norm(&dir).max(1e-300);
        let dir: Vec<f64> = dir.iter().map(|v| v / dn).collect();
        let spec_norm = spectral(group, &dir)?.norm().max(1e-300);
        let theta: Vec<f64> = dir.iter().map(|v| v * radius / spec_norm).collect();
        let mut zeta = zeta_from_theta(group, &g.x, &theta).unwrap_or_default();
        if zeta.len() != q || norm2(&zeta) < 1e-12 * scale || norm2(&zeta) > 1e4 * scale {
            zeta = (0..q).map(|_| unit.sample(&mut rng) * scale.sqrt() / (q as f64).sqrt()).collect();
        }
        let mut z = zeta;
        z.extend(theta.iter().map(|v| 2.0 * v));
        trials.push(z);
    }
    let tol = 1e-9 * (1.0 + g.euclidean_norm());
    let solved: Vec<Option<ShootingRecord>> = trials
        .par_iter()
        .map(|z0| {
            let sol = levenberg_marquardt(|v| shoot_residual(group, g, v), z0, 100, 1e-12 * (1.0 + g.euclidean_norm())).ok()?;
            (sol.residual <= tol).then(|| ShootingRecord {
                energy: norm2(&sol.x[..q]),
                covector: Covector {
                    zeta: sol.x[..q].to_vec(),
                    tau: sol.x[q..].to_vec(),
                },
                residual: sol.residual,
            })
        })
        .collect();
    let mut records: Vec<ShootingRecord> = Vec::new();
    for r in solved.into_iter().flatten() {
        let dup = records.iter().any(|o| covector_distance(&o.covector, &r.covector) <= 1e-6);
        if !dup {
            records.push(r);
        }
    }
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let best = records.first().ok_or(Error::NoneFound)?;
    Ok(ShootingResult {
        energy: best.energy,
        covector: best.covector.clone(),
        records,
    })
}

/// Relative distance between two covectors.
pub fn covector_distance(a: &Cov, b: &Cov) -> f64 {
    let mut d = 0.0;
    let mut s = 0.0;
    for (x, y) in a.zeta.iter().chain(&a.tau).zip(b.zeta.iter().chain(&b.tau)) {
        d += (x - y) * (x - y);
        s += x * x + y * y;
    }
    d.sqrt() / (1.0 + s.sqrt())
}

fn mu(s: f64) -> f64 {
    if s.abs() < 1e-3 {
        // (2s − sin 2s) / (2 sin² s) = 2s/3 + 4s³/45 + …
        return 2.0 * s / 3.0 + 4.0 * s.powi(3) / 45.0 + 8.0 * s.powi(5) / 945.0;
    }
    (2.0 * s - (2.0 * s).sin()) / (2.0 * s.sin().powi(2))
}

/// Squared distance on the Heisenberg group from `μ(θ) = 4|t|/|x|²`.
pub fn heisenberg_closed_form(x: &[f64], t: f64) -> f64 {
    let r2 = norm2(x);
    if r2 == 0.0 {
        return 4.0 * std::f64::consts::PI * t.abs();
    }
    if t == 0.0 {
        return r2;
    }
    let target = 4.0 * t.abs() / r2;
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mu(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    (th / th.sin()).powi(2) * r2
}

/// `x`-formula consistency helper re-exported for the shooting starts.
pub fn predicted_x(group: &Group, zeta: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    x_component_closed_form(group, zeta, theta)
}

/// Endpoint residual of a shooting record.
pub fn record_residual(group: &Group, g: &Point, c: &Cov) -> Result<f64> {
    Ok(endpoint_residual(&exp_map(group, &c.zeta, &c.tau)?, g))
}

/// Energy along a path with the `t`-sweep replaced by explicit segment
/// integration, for cross-checking `integrate_controls`.
pub fn energy_of(u: &[Vec<f64>]) -> f64 {
    u.iter().map(|v| dot(v, v)).sum::<f64>() / u.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin_group;
    use std::f64::consts::PI;

    fn heis() -> Group {
        builtin_group("heisenberg(1)").unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert!((heisenberg_closed_form(&[1.0, 0.0], PI / 8.0) - PI * PI / 4.0).abs() < 1e-12);
        assert_eq!(heisenberg_closed_form(&[1.0, 0.0], 0.0), 1.0);
        assert!((heisenberg_closed_form(&[0.0, 0.0], 1.0) - 4.0 * PI).abs() < 1e-15);
        // continuity toward the axis
        let near = heisenberg_closed_form(&[1e-4, 0.0], 1.0);
        assert!((near - 4.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn control_integration() {
        let g = heis();
        let p = integrate_controls(&g, &[vec![0.3, 0.4]]).unwrap();
        assert_eq!(p, GroupPoint::new(vec![0.3, 0.4], vec![0.0]));
        let sq = vec![vec![4.0, 0.0], vec![0.0, 4.0], vec![-4.0, 0.0], vec![0.0, -4.0]];
        let p = integrate_controls(&g, &sq).unwrap();
        assert!(p.x.iter().all(|v| v.abs() < 1e-15));
        assert!((p.t[0].abs() - 1.0).abs() < 1e-15);
        let fwd = vec![vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.7, 0.1]];
        let mut both = fwd.clone();
        both.extend(fwd.iter().rev().map(|v| v.iter().map(|a| -a).collect()));
        let p = integrate_controls(&g, &both).unwrap();
        assert!(p.x.iter().chain(&p.t).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn transcription_gradient_matches_finite_differences() {
        let g: Group = builtin_group("n32").unwrap();
        let target = GroupPoint::new(vec![0.2, 0.1, -0.3], vec![0.4, -0.2, 0.1]);
        let tr = Transcription {
            group: &g,
            target: &target,
            n: 8,
        };
        let d: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 20.0).collect();
        let (c, prefix) = tr.residual(&d);
        let jc = tr.jt_times(&prefix, &c);
        let f = |z: &[f64]| 0.5 * norm2(&tr.residual(z).0);
        for i in 0..24 {
            let mut p = d.clone();
            p[i] += 1e-6;
            let mut m = d.clone();
            m[i] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - jc[i]).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn direct_straight_line() {
        let g = heis();
        let r = direct_distance(&g, &GroupPoint::new(vec![1.0, 0.0], vec![0.0]), 64, 2, 1).unwrap();
        assert!((r.energy - 1.0).abs() < 1e-4);
    }

    #[test]
    fn shooting_heisenberg() {
        let g = heis();
        let p = GroupPoint::new(vec![1.0, 0.0], vec![PI / 8.0]);
        let s = shooting_distance(&g, &p, 8, 3).unwrap();
        assert!((s.energy - PI * PI / 4.0).abs() < 1e-6);
        let line = shooting_distance(&g, &GroupPoint::new(vec![0.6, 0.8], vec![0.0]), 4, 3).unwrap();
        assert!((line.energy - 1.0).abs() < 1e-9);
    }
}
