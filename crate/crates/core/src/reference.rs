//! Reference functions `φ`, `φ_k`, the lift `F_k` and the level-k objective
//! `Φ_{k,*}(g; s, τ)` with derivatives in `(s, τ)`.

use crate::bessel::first_zero;
use crate::error::{Error, Result};
use crate::group::{GroupPoint, StepTwoGroup};
use crate::linalg::{dot, norm2, Matrix};
use crate::matfun::{form_derivatives, spectral, EvenKernel, SpectralData};

type Group = StepTwoGroup<f64>;
type Mat = Matrix<f64>;

/// `s = (s_1, …, s_k)`, empty at level 0.
pub type SegmentVector = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct ReferenceEvaluation {
    pub value: f64,
    pub grad_tau: Vec<f64>,
    pub grad_s: SegmentVector,
    /// Hessian in the stacked variable `(s_1, …, s_k, τ)`.
    pub hess: Option<Mat>,
    pub boundary_margin: f64,
}

impl ReferenceEvaluation {
    /// Gradient in the stacked variable `(s_1, …, s_k, τ)`.
    pub fn gradient(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.grad_s.iter().flatten().copied().collect();
        g.extend_from_slice(&self.grad_tau);
        g
    }
}

/// `Z_{k,1} − ‖U(τ)‖`
pub fn omega_margin(group: &Group, tau: &[f64], k: usize) -> Result<f64> {
    Ok(first_zero(k) - spectral(group, tau)?.norm())
}

fn margin_of(spec: &SpectralData, k: usize) -> f64 {
    first_zero(k) - spec.norm()
}

fn guard(spec: &SpectralData, k: usize) -> Result<f64> {
    let z = first_zero(k);
    let margin = margin_of(spec, k);
    if margin < 1e-10 * z {
        return Err(Error::DomainViolation {
            index: spec.beta.len().saturating_sub(1),
            value: spec.norm(),
            limit: z,
        });
    }
    Ok(margin)
}

/// `φ(g; τ) = ⟨U(τ) cot U(τ) x, x⟩ + 4 t·τ`
pub fn phi(group: &Group, g: &GroupPoint<f64>, tau: &[f64]) -> Result<f64> {
    Ok(phi_k_star(group, g, &[], tau, 0, 0)?.value)
}

/// `F_k(x, t, s) = (s_k, t + B(x, s_1)/√2 + Σ_{j≥2} B(s_{j−1}, s_j))`
pub fn f_k_map(group: &Group, x: &[f64], t: &[f64], s: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    group.check_horizontal(x)?;
    group.check_vertical(t)?;
    if s.is_empty() {
        return Err(Error::InvalidArgument("the lift needs level k ≥ 1".into()));
    }
    for sj in s {
        group.check_horizontal(sj)?;
    }
    let mut big_t = t.to_vec();
    let xs: Vec<f64> = x.iter().map(|v| v / std::f64::consts::SQRT_2).collect();
    let mut prev = xs.as_slice();
    for sj in s {
        for (tt, b) in big_t.iter_mut().zip(group.bracket(prev, sj)) {
            *tt += b;
        }
        prev = sj;
    }
    Ok((s[s.len() - 1].clone(), big_t))
}

/// `φ_k((X, T); τ) = 2⟨R_k(U(iτ)) X, X⟩ + 4 T·τ`
pub fn phi_k(group: &Group, big_x: &[f64], big_t: &[f64], tau: &[f64], k: usize) -> Result<f64> {
    group.check_vertical(big_t)?;
    let spec = spectral(group, tau)?;
    guard(&spec, k)?;
    let f = form_derivatives(group, EvenKernel::Rk(k), &spec, big_x, 0)?;
    Ok(2.0 * f.value + 4.0 * dot(big_t, tau))
}

/// Gradient (in τ) and Hessian of `φ_k((X, T); ·)` at `τ`.
pub fn phi_k_derivatives(group: &Group, big_x: &[f64], big_t: &[f64], tau: &[f64], k: usize) -> Result<(f64, Vec<f64>, Mat)> {
    let spec = spectral(group, tau)?;
    guard(&spec, k)?;
    let f = form_derivatives(group, EvenKernel::Rk(k), &spec, big_x, 2)?;
    let grad = f.grad.iter().zip(big_t).map(|(a, t)| 2.0 * a + 4.0 * t).collect();
    let hess = f.hess.expect("order 2").scale(2.0);
    Ok((2.0 * f.value + 4.0 * dot(big_t, tau), grad, hess))
}

/// `Φ_{k,*}(g; s, τ)`; `order` selects value (0), gradient (1) or Hessian (2).
/// At level 0 this is `φ(g; τ)`.
pub fn phi_k_star(group: &Group, g: &GroupPoint<f64>, s: &[Vec<f64>], tau: &[f64], k: usize, order: usize) -> Result<ReferenceEvaluation> {
    group.check_point(g)?;
    group.check_vertical(tau)?;
    if s.len() != k {
        return Err(Error::DimensionMismatch {
            what: "segment vector level",
            expected: k,
            found: s.len(),
        });
    }
    let spec = spectral(group, tau)?;
    let margin = guard(&spec, k)?;
    if k == 0 {
        let f = form_derivatives(group, EvenKernel::Cot, &spec, &g.x, order)?;
        let value = f.value + 4.0 * dot(&g.t, tau);
        let grad_tau = if order >= 1 {
            f.grad.iter().zip(&g.t).map(|(a, t)| a + 4.0 * t).collect()
        } else {
            Vec::new()
        };
        return Ok(ReferenceEvaluation {
            value,
            grad_tau,
            grad_s: Vec::new(),
            hess: f.hess,
            boundary_margin: margin,
        });
    }
    let (big_x, big_t) = f_k_map(group, &g.x, &g.t, s)?;
    let f = form_derivatives(group, EvenKernel::Rk(k), &spec, &big_x, order)?;
    let mut value = norm2(&g.x) + 2.0 * f.value + 4.0 * dot(&big_t, tau);
    for (j, sj) in s.iter().enumerate() {
        value += 2.0 * (2 * j + 3) as f64 * norm2(sj);
    }
    let mut out = ReferenceEvaluation {
        value,
        grad_tau: Vec::new(),
        grad_s: Vec::new(),
        hess: None,
        boundary_margin: margin,
    };
    if order == 0 {
        return Ok(out);
    }
    let q = group.q();
    let m = group.m();
    let ut = &spec.u_tilde;
    let xs: Vec<f64> = g.x.iter().map(|v| v / std::f64::consts::SQRT_2).collect();
    let prev_of = |j: usize| -> &[f64] {
        if j == 0 {
            &xs
        } else {
            &s[j - 1]
        }
    };
    out.grad_tau = f.grad.iter().zip(&big_t).map(|(a, t)| 2.0 * a + 4.0 * t).collect();
    for j in 0..k {
        let mut gj: Vec<f64> = s[j].iter().map(|v| 4.0 * (2 * j + 3) as f64 * v).collect();
        let back = ut.tmatvec(prev_of(j));
        for (a, b) in gj.iter_mut().zip(back) {
            *a += 4.0 * b;
        }
        if j + 1 < k {
            for (a, b) in gj.iter_mut().zip(ut.matvec(&s[j + 1])) {
                *a += 4.0 * b;
            }
        }
        if j + 1 == k {
            let r = crate::matfun::apply_even(EvenKernel::Rk(k), &spec)?;
            for (a, b) in gj.iter_mut().zip(r.matvec(&s[j])) {
                *a += 4.0 * b;
            }
        }
        out.grad_s.push(gj);
    }
    if order == 1 {
        return Ok(out);
    }
    let n = k * q + m;
    let mut h = Matrix::zeros(n, n);
    let r = crate::matfun::apply_even(EvenKernel::Rk(k), &spec)?;
    for j in 0..k {
        let o = j * q;
        for a in 0..q {
            h[(o + a, o + a)] += 4.0 * (2 * j + 3) as f64;
        }
        if j + 1 == k {
            for a in 0..q {
                for b in 0..q {
                    h[(o + a, o + b)] += 4.0 * r[(a, b)];
                }
            }
        }
        if j + 1 < k {
            let o2 = (j + 1) * q;
            for a in 0..q {
                for b in 0..q {
                    h[(o + a, o2 + b)] += 4.0 * ut[(a, b)];
                    h[(o2 + b, o + a)] += 4.0 * ut[(a, b)];
                }
            }
        }
    }
    let u = group.matrices();
    let mixed = f.mixed.expect("order 2 fills mixed terms");
    for i in 0..m {
        let col = k * q + i;
        for j in 0..k {
            // ∂T_i/∂s_j = U⁽ⁱ⁾ᵀ s_{j−1} + U⁽ⁱ⁾ s_{j+1}
            let mut d = u[i].tmatvec(prev_of(j));
            if j + 1 < k {
                for (a, b) in d.iter_mut().zip(u[i].matvec(&s[j + 1])) {
                    *a += b;
                }
            }
            for a in 0..q {
                let mut v = 4.0 * d[a];
                if j + 1 == k {
                    v += 2.0 * mixed[i][a];
                }
                h[(j * q + a, col)] = v;
                h[(col, j * q + a)] = v;
            }
        }
    }
    let ht = f.hess.expect("order 2");
    for i in 0..m {
        for l in 0..m {
            h[(k * q + i, k * q + l)] = 2.0 * ht[(i, l)];
        }
    }
    out.hess = Some(h);
    Ok(out)
}

/// Splits a stacked `(s_1, …, s_k, τ)` vector.
pub fn unstack(z: &[f64], k: usize, q: usize) -> (SegmentVector, Vec<f64>) {
    let s = (0..k).map(|j| z[j * q..(j + 1) * q].to_vec()).collect();
    (s, z[k * q..].to_vec())
}

/// Stacks `(s, τ)` into one vector.
pub fn stack(s: &[Vec<f64>], tau: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = s.iter().flatten().copied().collect();
    z.extend_from_slice(tau);
    z
}
