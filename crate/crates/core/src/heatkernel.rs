//! Heat kernel `p_h` and the level kernels `P_{k,h}` by quadrature of their
//! Fourier representations in the vertical variable, plus small-time
//! asymptotics and Varadhan-limit estimates.
//!
//! For `m = 1` the real line is shifted to `Im λ = θ`, where `θ` maximizes
//! the reference function; the integrand is analytic on the strip
//! `‖Ũ(Im λ)‖ < Z_{k,1}`, so the value is unchanged while the cancellation
//! that ruins small-`h` evaluations on the real line disappears.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{first_zero, ln_q_k, ln_q_k_complex, q_k, r_k_complex, Q0_AT_ZERO};
use crate::error::{Error, Result};
use crate::group::{GroupPoint, StepTwoGroup};
use crate::linalg::{determinant, dot, SymEigen};
use crate::matfun::{apply_even, spectral, EvenKernel};
use crate::optimize::{inner_sup, inner_sup_phi_k, InnerStatus, SolverConfig};
use crate::quadrature::{gauss_hermite, gauss_legendre, pairwise_sum};
use crate::reference::{phi_k_derivatives, phi_k_star};

type Group = StepTwoGroup<f64>;

const MAX_TENSOR_NODES: usize = 1 << 22;
type Point = GroupPoint<f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Target error relative to the integrand peak.
    pub tol: f64,
    pub lambda_cap: f64,
    /// Largest panel count per half line (`m = 1`) or per axis (`m ≥ 2`).
    pub max_panels: usize,
    pub hermite_nodes: usize,
    pub contour_shift: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: 16,
            tol: 1e-8,
            lambda_cap: 200.0,
            max_panels: 1 << 14,
            hermite_nodes: 20,
            contour_shift: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatKernelEstimate {
    pub value: f64,
    /// `ln value`, finite even when `value` underflows.
    pub ln_value: f64,
    pub h: f64,
    pub quad_error: f64,
    pub truncation_radius: f64,
    pub imag_residual: f64,
    /// Imaginary part of the integration contour.
    pub shift: Vec<f64>,
    pub converged: bool,
}

/// `C_{q,m} = (2π)^{−m} (4π)^{−q/2}`, fixed by requiring the `t`-marginal of
/// `p_h(x, ·)` to be the Euclidean heat kernel `(4πh)^{−q/2} e^{−|x|²/4h}`.
pub fn normalization(q: usize, m: usize) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    tau.powi(-(m as i32)) * (2.0 * tau).powf(-(q as f64) / 2.0)
}

/// `C̃_{q,m}` with `p_h(x, t) = C̃ e^{−|x|²/4h} P_{0,h}(x/√2, t)`.
pub fn normalization_level_zero(q: usize, m: usize) -> f64 {
    normalization(q, m) * Q0_AT_ZERO.powf(q as f64 / 2.0)
}

/// `C_q = (2π)^{q/2}`
pub fn gaussian_constant(q: usize) -> f64 {
    (2.0 * std::f64::consts::PI).powf(q as f64 / 2.0)
}

fn check_dims(group: &Group, h: f64) -> Result<()> {
    if group.m() > 3 {
        return Err(Error::UnsupportedDimension(group.m()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveScale(h));
    }
    Ok(())
}

/// Spectrum of `S_1 = U⁽¹⁾ᵀU⁽¹⁾` split into pairs and zero modes, with
/// `y = Vᵀ X` coordinates; `Ũ(λ)` for `λ ∈ ℂ` has `S(λ) = λ² S_1`.
struct LineSpectrum {
    pairs: Vec<f64>,
    zeros: usize,
    c2: Vec<f64>,
    y2: Vec<f64>,
}

impl LineSpectrum {
    fn new(group: &Group, x: &[f64]) -> Result<Self> {
        let u = &group.matrices()[0];
        let eig = SymEigen::new(&u.transpose().matmul(u))?;
        let y = eig.vectors.tmatvec(x);
        let top = eig.max_value().max(1e-300);
        let c2: Vec<f64> = eig.values.iter().map(|&v| if v < 1e-14 * top { 0.0 } else { v }).collect();
        let mut nonzero: Vec<f64> = c2.iter().copied().filter(|v| *v > 0.0).collect();
        nonzero.sort_by(|a, b| b.total_cmp(a));
        let pairs = nonzero.chunks(2).map(|p| p[0]).collect();
        let zeros = c2.iter().filter(|v| **v == 0.0).count();
        Ok(LineSpectrum {
            pairs,
            zeros,
            c2,
            y2: y.iter().map(|v| v * v).collect(),
        })
    }

    fn top(&self) -> f64 {
        self.pairs.first().copied().unwrap_or(0.0).sqrt()
    }
}

/// `(ln z/sinh z, z coth z)` for complex `z`, stable for large `|Re z|`.
fn sinh_terms(z: Complex64) -> (Complex64, Complex64) {
    let z = if z.re < 0.0 { -z } else { z };
    if z.norm() < 1e-3 {
        let z2 = z * z;
        return (-z2 / 6.0 + z2 * z2 / 180.0, 1.0 + z2 / 3.0 - z2 * z2 / 45.0);
    }
    let e = (-2.0 * z).exp();
    let ln_sinh = z + ((1.0 - e) / 2.0).ln();
    (z.ln() - ln_sinh, z * (1.0 + e) / (1.0 - e))
}

/// Integrand of a one-dimensional Fourier representation, as a complex log.
type LogIntegrand<'a> = dyn Fn(Complex64) -> Result<Complex64> + Sync + 'a;

struct LineIntegral {
    /// `ln |F(iσ)|`
    ln_peak: f64,
    /// `∫ F / |F(iσ)|` over the shifted line.
    integral: Complex64,
    error: f64,
    radius: f64,
    converged: bool,
}

fn panel_sum(f: &LogIntegrand, ln_peak: f64, sigma: f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Result<Complex64> {
    let width = (b - a) / panels as f64;
    let parts: Vec<Result<Complex64>> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let lo = a + p as f64 * width;
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let mu = lo + 0.5 * width * (x + 1.0);
                acc += (f(Complex64::new(mu, sigma))? - ln_peak).exp() * (0.5 * width * w);
            }
            Ok(acc)
        })
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let re: Vec<f64> = parts.iter().map(|c| c.re).collect();
    let im: Vec<f64> = parts.iter().map(|c| c.im).collect();
    Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)))
}

fn integrate_line(f: &LogIntegrand, sigma: f64, unit: f64, quad: &QuadConfig) -> Result<LineIntegral> {
    let ln_peak = f(Complex64::new(0.0, sigma))?.re;
    let small = |mu: f64| -> Result<bool> {
        Ok(f(Complex64::new(mu, sigma))?.re - ln_peak < (1e-3 * quad.tol).ln() && f(Complex64::new(-mu, sigma))?.re - ln_peak < (1e-3 * quad.tol).ln())
    };
    let mut radius = unit;
    let mut converged = true;
    while !(small(radius)? && small(1.5 * radius)?) {
        radius *= 2.0;
        if radius > quad.lambda_cap {
            radius = quad.lambda_cap;
            converged = false;
            break;
        }
    }
    let rule = gauss_legendre(quad.order);
    let mut panels = 8;
    let mut prev = panel_sum(f, ln_peak, sigma, -radius, radius, 2 * panels, &rule)?;
    loop {
        panels *= 2;
        let cur = panel_sum(f, ln_peak, sigma, -radius, radius, 2 * panels, &rule)?;
        let err = (cur - prev).norm();
        if err <= quad.tol * cur.norm().max(1e-300) || err <= quad.tol * 1e-3 {
            return Ok(LineIntegral {
                ln_peak,
                integral: cur,
                error: err,
                radius,
                converged,
            });
        }
        if panels >= quad.max_panels {
            return Ok(LineIntegral {
                ln_peak,
                integral: cur,
                error: err,
                radius,
                converged: false,
            });
        }
        prev = cur;
    }
}

/// Tensor Gauss–Legendre on `[−Λ, Λ]^m` for a real integrand given as
/// `(ln amplitude, phase)`; returns `(ln_peak, normalized integral, error,
/// radius, converged)`.
fn integrate_box(f: &(dyn Fn(&[f64]) -> Result<(f64, f64)> + Sync), m: usize, unit: f64, quad: &QuadConfig) -> Result<LineIntegral> {
    let zero = vec![0.0; m];
    let ln_peak = f(&zero)?.0;
    let mut radius = unit;
    let mut converged = true;
    let decayed = |r: f64| -> Result<bool> {
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let mut p = zero.clone();
                p[i] = sign * r;
                if f(&p)?.0 - ln_peak >= (1e-3 * quad.tol).ln() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    while !(decayed(radius)? && decayed(1.5 * radius)?) {
        radius *= 2.0;
        if radius > quad.lambda_cap {
            radius = quad.lambda_cap;
            converged = false;
            break;
        }
    }
    let rule = gauss_legendre(quad.order);
    let eval = |panels: usize| -> Result<f64> {
        let width = 2.0 * radius / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let lo = -radius + p as f64 * width;
                rule.0
                    .iter()
                    .zip(&rule.1)
                    .map(move |(x, w)| (lo + 0.5 * width * (x + 1.0), 0.5 * width * w))
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = nodes.len();
        let total = n.pow(m as u32);
        let vals: Vec<Result<f64>> = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut lam = vec![0.0; m];
                let mut w = 1.0;
                for l in lam.iter_mut() {
                    let (x, wx) = nodes[idx % n];
                    *l = x;
                    w *= wx;
                    idx /= n;
                }
                let (amp, phase) = f(&lam)?;
                Ok(w * (amp - ln_peak).exp() * phase.cos())
            })
            .collect();
        Ok(pairwise_sum(&vals.into_iter().collect::<Result<Vec<_>>>()?))
    };
    let mut panels = 2;
    let mut prev = eval(panels)?;
    loop {
        panels *= 2;
        let cur = eval(panels)?;
        let err = (cur - prev).abs();
        if err <= quad.tol * cur.abs().max(1e-300) || err <= quad.tol * 1e-3 {
            return Ok(LineIntegral {
                ln_peak,
                integral: Complex64::new(cur, 0.0),
                error: err,
                radius,
                converged,
            });
        }
        if panels >= quad.max_panels || (panels * 2 * quad.order).pow(m as u32) > MAX_TENSOR_NODES {
            return Ok(LineIntegral {
                ln_peak,
                integral: Complex64::new(cur, 0.0),
                error: err,
                radius,
                converged: false,
            });
        }
        prev = cur;
    }
}

fn finish(ln_prefactor: f64, h: f64, tol: f64, shift: Vec<f64>, r: LineIntegral) -> Result<HeatKernelEstimate> {
    let ln_scale = ln_prefactor + r.ln_peak;
    let re = r.integral.re;
    if !(re > 0.0) {
        return Err(Error::Unconverged {
            estimate: re * ln_scale.exp(),
            error: r.error * ln_scale.exp(),
        });
    }
    let ln_value = ln_scale + re.ln();
    Ok(HeatKernelEstimate {
        value: ln_value.exp(),
        ln_value,
        h,
        quad_error: r.error * ln_scale.exp(),
        truncation_radius: r.radius,
        imag_residual: r.integral.im.abs() * ln_scale.exp(),
        shift,
        converged: r.converged && r.error <= tol.sqrt() * re,
    })
}

/// Contour height: the maximizer when interior, otherwise pulled back from
/// the boundary by a fraction `h/(h + Σ|t|)`.
fn contour_height(theta: &[f64], status: InnerStatus, h: f64, t: &[f64]) -> f64 {
    let th = theta[0];
    if status == InnerStatus::Interior {
        return th;
    }
    let pull = h / (h + t.iter().map(|v| v.abs()).sum::<f64>());
    th * (1.0 - pull.clamp(1e-6, 0.5))
}

/// `p_h(g)` from `C_{q,m} h^{−q/2−m} ∫ V(λ) e^{−φ̃(g; λ)/4h} dλ`, with `V` and
/// `U coth U` evaluated from elementary functions.
pub fn heat_kernel(group: &Group, g: &Point, h: f64, quad: &QuadConfig) -> Result<HeatKernelEstimate> {
    group.check_point(g)?;
    check_dims(group, h)?;
    let q = group.q();
    let m = group.m();
    let ln_prefactor = normalization(q, m).ln() - (q as f64 / 2.0 + m as f64) * h.ln();
    if m == 1 {
        let ls = LineSpectrum::new(group, &g.x)?;
        let sigma = if quad.contour_shift && ls.top() > 0.0 {
            let r = inner_sup(group, g, &[], 0, &SolverConfig::default())?;
            contour_height(&r.theta, r.status, h, &g.t)
        } else {
            0.0
        };
        let f = |lam: Complex64| -> Result<Complex64> {
            let mut out = Complex64::new(0.0, g.t[0] / h) * lam;
            for &c2 in &ls.pairs {
                out += sinh_terms(lam * c2.sqrt()).0;
            }
            for (c2, y2) in ls.c2.iter().zip(&ls.y2) {
                let coth = if *c2 == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    sinh_terms(lam * c2.sqrt()).1
                };
                out -= coth * (y2 / (4.0 * h));
            }
            Ok(out)
        };
        let unit = 1.0 / ls.top().max(1e-3);
        let r = integrate_line(&f, sigma, unit, quad)?;
        return finish(ln_prefactor, h, quad.tol, vec![sigma], r);
    }
    let f = |lam: &[f64]| -> Result<(f64, f64)> {
        let spec = spectral(group, lam)?;
        let y = spec.project(&g.x);
        let mut amp = 0.0;
        for (b2, yy) in spec.beta.iter().zip(&y) {
            let (ls, ct) = sinh_terms(Complex64::new(b2.sqrt(), 0.0));
            amp += 0.5 * ls.re - ct.re * yy * yy / (4.0 * h);
        }
        Ok((amp, dot(&g.t, lam) / h))
    };
    let unit = 1.0 / spectral_unit(group)?;
    let r = integrate_box(&f, m, unit, quad)?;
    finish(ln_prefactor, h, quad.tol, vec![0.0; m], r)
}

fn spectral_unit(group: &Group) -> Result<f64> {
    let mut top: f64 = 0.0;
    for i in 0..group.m() {
        let mut e = vec![0.0; group.m()];
        e[i] = 1.0;
        top = top.max(spectral(group, &e)?.norm());
    }
    Ok(top.max(1e-3))
}

/// `P_{k,h}(X, T) = h^{−(k+1)q/2−m} ∫ det Q_k(U(λ))^{−1/2}
/// exp{−(⟨R_k(U(λ)) X, X⟩ − 2i T·λ)/2h} dλ`.
pub fn p_k_h(group: &Group, k: usize, big_x: &[f64], big_t: &[f64], h: f64, quad: &QuadConfig) -> Result<HeatKernelEstimate> {
    group.check_horizontal(big_x)?;
    group.check_vertical(big_t)?;
    check_dims(group, h)?;
    let q = group.q();
    let m = group.m();
    let ln_prefactor = -(((k + 1) * q) as f64 / 2.0 + m as f64) * h.ln();
    if m == 1 {
        let ls = LineSpectrum::new(group, big_x)?;
        let sigma = if quad.contour_shift && ls.top() > 0.0 {
            let r = inner_sup_phi_k(group, big_x, big_t, k, &SolverConfig::default())?;
            contour_height(&r.theta, r.status, h, big_t)
        } else {
            0.0
        };
        let ln_q0 = ln_q_k(k, 0.0)?;
        let f = |lam: Complex64| -> Result<Complex64> {
            let l2 = lam * lam;
            let mut out = Complex64::new(0.0, big_t[0] / h) * lam - 0.5 * ln_q0 * ls.zeros as f64;
            for &c2 in &ls.pairs {
                out -= ln_q_k_complex(k, l2 * c2)?;
            }
            for (c2, y2) in ls.c2.iter().zip(&ls.y2) {
                if *c2 > 0.0 {
                    out -= r_k_complex(k, l2 * *c2)? * (y2 / (2.0 * h));
                }
            }
            Ok(out)
        };
        let unit = 1.0 / ls.top().max(1e-3);
        let r = integrate_line(&f, sigma, unit, quad)?;
        return finish(ln_prefactor, h, quad.tol, vec![sigma], r);
    }
    let f = |lam: &[f64]| -> Result<(f64, f64)> {
        let spec = spectral(group, lam)?;
        let mut amp = 0.0;
        for &b in &spec.beta {
            amp -= 0.5 * ln_q_k(k, b)?;
        }
        let r = apply_even(EvenKernel::RkHyperbolic(k), &spec)?;
        amp -= r.bilinear(big_x, big_x) / (2.0 * h);
        Ok((amp, dot(big_t, lam) / h))
    };
    let unit = 1.0 / spectral_unit(group)?;
    let r = integrate_box(&f, m, unit, quad)?;
    finish(ln_prefactor, h, quad.tol, vec![0.0; m], r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_discrepancy: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
    pub nodes: usize,
}

/// Both sides of `P_{k,h}(X, T) = C_q⁻¹ ∫ e^{−(2k+3)|s|²/2h}
/// P_{k+1,h}(s, T + B(X, s)) ds`, the right side by tensor Gauss–Hermite.
pub fn verify_relation_relpk(group: &Group, k: usize, big_x: &[f64], big_t: &[f64], h: f64, quad: &QuadConfig) -> Result<RelationReport> {
    let q = group.q();
    if q > 3 || group.m() > 2 {
        return Err(Error::UnsupportedDimension(q.max(group.m())));
    }
    let lhs = p_k_h(group, k, big_x, big_t, h, quad)?;
    let a = (2 * k + 3) as f64 / (2.0 * h);
    let (y, w) = gauss_hermite(quad.hermite_nodes);
    let n = y.len();
    let total = n.pow(q as u32);
    let terms: Vec<Result<(f64, f64)>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut s = vec![0.0; q];
            let mut weight = 1.0;
            for si in s.iter_mut() {
                *si = y[idx % n] / a.sqrt();
                weight *= w[idx % n];
                idx /= n;
            }
            let shift: Vec<f64> = big_t.iter().zip(group.bracket(big_x, &s)).map(|(t, b)| t + b).collect();
            let p = p_k_h(group, k + 1, &s, &shift, h, quad)?;
            Ok((weight * p.value, weight * p.quad_error))
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    let c = a.powf(-(q as f64) / 2.0) / gaussian_constant(q);
    let rhs = c * pairwise_sum(&terms.iter().map(|t| t.0).collect::<Vec<_>>());
    let rhs_error = c * terms.iter().map(|t| t.1).sum::<f64>();
    Ok(RelationReport {
        lhs: lhs.value,
        rhs,
        relative_discrepancy: (lhs.value - rhs).abs() / lhs.value.abs().max(1e-300),
        lhs_error: lhs.quad_error,
        rhs_error,
        nodes: total,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaradhanReport {
    pub h: Vec<f64>,
    /// `−4h ln p_h(g)` per `h`.
    pub estimates: Vec<f64>,
    pub extrapolated: f64,
    /// Whether the estimates move monotonically as `h` decreases.
    pub monotone: bool,
}

/// `−4h ln p_h(g)` along a decreasing `h` list, extrapolated to `h = 0` by a
/// least-squares fit of `d² + a·h ln h + b·h`.
pub fn varadhan_estimate(group: &Group, g: &Point, h_list: &[f64], quad: &QuadConfig) -> Result<VaradhanReport> {
    if h_list.is_empty() || h_list.windows(2).any(|w| w[1] >= w[0]) || h_list.iter().any(|h| *h <= 0.0) {
        return Err(Error::InvalidArgument("h_list must be positive and strictly decreasing".into()));
    }
    let mut estimates = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let p = heat_kernel(group, g, h, quad)?;
        if !p.converged {
            return Err(Error::Unconverged {
                estimate: p.value,
                error: p.quad_error,
            });
        }
        estimates.push(-4.0 * h * p.ln_value);
    }
    let extrapolated = extrapolate(h_list, &estimates);
    let diffs: Vec<f64> = estimates.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    Ok(VaradhanReport {
        h: h_list.to_vec(),
        estimates,
        extrapolated,
        monotone,
    })
}

fn extrapolate(h: &[f64], e: &[f64]) -> f64 {
    match h.len() {
        1 => e[0],
        2 => (e[1] * h[0] - e[0] * h[1]) / (h[0] - h[1]),
        _ => {
            // normal equations for (d², a, b)
            let rows: Vec<[f64; 3]> = h.iter().map(|&x| [1.0, x * x.ln(), x]).collect();
            let mut ata = crate::linalg::Matrix::zeros(3, 3);
            let mut atb = vec![0.0; 3];
            for (r, y) in rows.iter().zip(e) {
                for i in 0..3 {
                    atb[i] += r[i] * y;
                    for j in 0..3 {
                        ata[(i, j)] += r[i] * r[j];
                    }
                }
            }
            crate::linalg::solve(&ata, &atb).map(|c| c[0]).unwrap_or(e[e.len() - 1])
        }
    }
}

/// Logarithm of the leading small-`h` term: of `p_h(g)` at `k = 0`, and of
/// `P_{k,h}(X, T)` with `(X, T) = (g.x, g.t)` for `k ≥ 1`.
pub fn ln_asymptotic_leading_term(group: &Group, g: &Point, k: usize, h: f64) -> Result<f64> {
    group.check_point(g)?;
    check_dims(group, h)?;
    let q = group.q() as f64;
    let m = group.m() as f64;
    let config = SolverConfig::default();
    let eight_pi = 8.0 * std::f64::consts::PI;
    if k == 0 {
        let r = inner_sup(group, g, &[], 0, &config)?;
        if r.status != InnerStatus::Interior || r.curvature <= 0.0 {
            return Err(Error::NotInM);
        }
        let e = phi_k_star(group, g, &[], &r.theta, 0, 2)?;
        let det = determinant(&e.hess.expect("order 2").scale(-1.0));
        if !(det > 0.0) {
            return Err(Error::NotInM);
        }
        let spec = spectral(group, &r.theta)?;
        let kv = EvenKernel::InvSinc.eval_all(&spec.beta)?;
        let ln_v = 0.5 * kv.f.iter().map(|v| v.ln()).sum::<f64>();
        return Ok(normalization(group.q(), group.m()).ln() + 0.5 * m * eight_pi.ln() - 0.5 * (q + m) * h.ln() + ln_v - e.value / (4.0 * h) - 0.5 * det.ln());
    }
    let r = inner_sup_phi_k(group, &g.x, &g.t, k, &config)?;
    if r.status != InnerStatus::Interior || r.curvature <= 0.0 {
        return Err(Error::NotInM);
    }
    let (value, _, hess) = phi_k_derivatives(group, &g.x, &g.t, &r.theta, k)?;
    let det = determinant(&hess.scale(-1.0));
    if !(det > 0.0) {
        return Err(Error::NotInM);
    }
    let spec = spectral(group, &r.theta)?;
    let mut ln_det_q = 0.0;
    for &b in &spec.beta {
        ln_det_q += q_k(k, -b)?.ln();
    }
    Ok(-0.5 * ((k + 1) as f64 * q + m) * h.ln() + 0.5 * m * eight_pi.ln() - 0.5 * ln_det_q - value / (4.0 * h) - 0.5 * det.ln())
}

/// The leading small-`h` term itself; see [`ln_asymptotic_leading_term`].
pub fn asymptotic_leading_term(group: &Group, g: &Point, k: usize, h: f64) -> Result<f64> {
    Ok(ln_asymptotic_leading_term(group, g, k, h)?.exp())
}

/// Largest `‖Ũ(θ)‖` admissible for the level-`k` kernels.
pub fn strip_half_width(k: usize) -> f64 {
    first_zero(k)
}
