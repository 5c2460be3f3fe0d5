//! Even matrix functions of `U(τ)` through the symmetric matrix
//! `S(τ) = Ũ(τ)ᵀ Ũ(τ)`, with first and second derivatives in `τ` by divided
//! differences.

use crate::bessel::{self, first_zero, q_k, q_ratios, r_k_derivatives, Q0_AT_ZERO};
use crate::error::{Error, Result};
use crate::group::StepTwoGroup;
use crate::linalg::{Matrix, SymEigen};

type Group = StepTwoGroup<f64>;
type Mat = Matrix<f64>;

/// Eigen-data of `S(τ)`: `S = basis · diag(beta) · basisᵀ`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub basis: Mat,
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub u_tilde: Mat,
}

impl SpectralData {
    /// `‖U(τ)‖`, the largest singular value of `Ũ(τ)`.
    pub fn norm(&self) -> f64 {
        self.beta.last().copied().unwrap_or(0.0).sqrt()
    }

    /// `basisᵀ x`
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis.tmatvec(x)
    }
}

pub fn spectral(group: &Group, tau: &[f64]) -> Result<SpectralData> {
    if tau.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite tau".into()));
    }
    let u = group.u_tilde(tau)?;
    let s = u.transpose().matmul(&u);
    let eig = SymEigen::new(&s)?;
    let beta = eig.values.iter().map(|&b| b.max(0.0)).collect();
    Ok(SpectralData {
        basis: eig.vectors,
        beta,
        tau: tau.to_vec(),
        u_tilde: u,
    })
}

/// Scalar kernels `f(β)` of `β = b²`, where `±ib` are the eigenvalues of
/// `Ũ(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvenKernel {
    /// `b cot b`
    Cot,
    /// `b / sin b`
    InvSinc,
    /// `sin b / b`
    Sinc,
    /// `b / sinh b`
    SinhcDet,
    /// `Q_k(b)`
    Qk(usize),
    /// `R_k(ib)`, the trigonometric side used by the level-k reference function.
    Rk(usize),
    /// `R_k(b)`, the hyperbolic side used by heat kernels.
    RkHyperbolic(usize),
}

/// Values and `β`-derivatives of a kernel on a spectrum.
#[derive(Debug, Clone)]
pub struct KernelValues {
    pub f: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl EvenKernel {
    /// Open upper bound on `β`, if any.
    pub fn domain_limit(&self) -> Option<f64> {
        match *self {
            EvenKernel::Cot | EvenKernel::InvSinc => Some(std::f64::consts::PI.powi(2)),
            EvenKernel::Rk(k) => Some(first_zero(k).powi(2)),
            _ => None,
        }
    }

    /// `[f, f', f'']` at `β`.
    pub fn eval(&self, beta: f64) -> Result<[f64; 3]> {
        match *self {
            EvenKernel::Cot => {
                let [r, d1, d2] = r_k_derivatives(0, -beta)?;
                Ok([1.0 + r, -d1, d2])
            }
            EvenKernel::Rk(k) => {
                let [r, d1, d2] = r_k_derivatives(k, -beta)?;
                Ok([r, -d1, d2])
            }
            EvenKernel::RkHyperbolic(k) => r_k_derivatives(k, beta),
            EvenKernel::Qk(k) => {
                let q = q_k(k, beta)?;
                let r = q_ratios(k, beta, 2)?;
                Ok([q, 0.5 * q * r[0], 0.25 * q * r[1]])
            }
            EvenKernel::SinhcDet => {
                let f = (Q0_AT_ZERO.ln() - bessel::ln_q_k(0, beta)?).exp();
                let r = q_ratios(0, beta, 2)?;
                Ok([f, -0.5 * f * r[0], f * (0.5 * r[0] * r[0] - 0.25 * r[1])])
            }
            EvenKernel::InvSinc => {
                let f = Q0_AT_ZERO / q_k(0, -beta)?;
                let r = q_ratios(0, -beta, 2)?;
                Ok([f, 0.5 * f * r[0], f * (0.5 * r[0] * r[0] - 0.25 * r[1])])
            }
            EvenKernel::Sinc => {
                if beta < 4.0 {
                    let c = 1.0 / Q0_AT_ZERO;
                    Ok([
                        c * bessel::series(0, -beta),
                        -0.5 * c * bessel::series(1, -beta),
                        0.25 * c * bessel::series(2, -beta),
                    ])
                } else {
                    let b = beta.sqrt();
                    let (j2, j1) = bessel::spherical_j(2, b);
                    Ok([b.sin() / b, -0.5 * j1 / b, 0.25 * j2 / beta])
                }
            }
        }
    }

    pub fn eval_all(&self, beta: &[f64]) -> Result<KernelValues> {
        if let Some(limit) = self.domain_limit() {
            for (i, &b) in beta.iter().enumerate() {
                if b >= limit * (1.0 - 1e-12) {
                    return Err(Error::DomainViolation { index: i, value: b, limit });
                }
                if limit - b < 1e-8 * limit {
                    log::warn!("kernel {self:?} evaluated near its boundary: beta[{i}] = {b}");
                }
            }
        }
        let mut out = KernelValues {
            f: Vec::with_capacity(beta.len()),
            d1: Vec::with_capacity(beta.len()),
            d2: Vec::with_capacity(beta.len()),
        };
        for &b in beta {
            let [f, d1, d2] = self.eval(b)?;
            out.f.push(f);
            out.d1.push(d1);
            out.d2.push(d2);
        }
        Ok(out)
    }
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * (1.0 + a.abs().max(b.abs()))
}

/// First divided differences `f[β_a, β_c]`.
pub fn divided_first(beta: &[f64], kv: &KernelValues) -> Mat {
    let n = beta.len();
    Matrix::from_fn(n, n, |a, c| {
        if tied(beta[a], beta[c]) {
            0.5 * (kv.d1[a] + kv.d1[c])
        } else {
            (kv.f[a] - kv.f[c]) / (beta[a] - beta[c])
        }
    })
}

/// Second divided difference `f[β_a, β_b, β_c]`.
pub fn divided_second(beta: &[f64], kv: &KernelValues, f1: &Mat, a: usize, b: usize, c: usize) -> f64 {
    let mut idx = [a, b, c];
    idx.sort_by(|&i, &j| beta[i].partial_cmp(&beta[j]).unwrap_or(std::cmp::Ordering::Equal));
    let [i, j, k] = idx;
    if tied(beta[i], beta[k]) {
        return (kv.d2[i] + kv.d2[j] + kv.d2[k]) / 6.0;
    }
    (f1[(j, k)] - f1[(i, j)]) / (beta[k] - beta[i])
}

/// `basis · diag(f(beta)) · basisᵀ`
pub fn apply_even(kernel: EvenKernel, spec: &SpectralData) -> Result<Mat> {
    let kv = kernel.eval_all(&spec.beta)?;
    let n = spec.beta.len();
    let v = &spec.basis;
    Ok(Matrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * kv.f[k] * v[(j, k)]).sum()))
}

/// `xᵀ f(S(τ)) x` together with its `τ`-gradient, `τ`-Hessian and the mixed
/// derivative `∂²/∂x∂τ_i`.
#[derive(Debug, Clone)]
pub struct FormDerivatives {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Mat>,
    /// row `i` is `∂/∂x` of `grad[i]`
    pub mixed: Option<Vec<Vec<f64>>>,
}

/// Derivatives of `S(τ)` along each `e_i` in the eigenbasis:
/// `E_i = Vᵀ (U⁽ⁱ⁾ᵀŨ + ŨᵀU⁽ⁱ⁾) V`.
fn derivative_blocks(group: &Group, spec: &SpectralData) -> Vec<Mat> {
    let v = &spec.basis;
    let vt = v.transpose();
    let ut = &spec.u_tilde;
    group
        .matrices()
        .iter()
        .map(|ui| {
            let a = ui.transpose().matmul(ut);
            let d = a.add(&a.transpose());
            vt.matmul(&d).matmul(v)
        })
        .collect()
}

/// Evaluates the form and its derivatives; `order` 0, 1 or 2 selects how much
/// is computed.
pub fn form_derivatives(group: &Group, kernel: EvenKernel, spec: &SpectralData, x: &[f64], order: usize) -> Result<FormDerivatives> {
    group.check_horizontal(x)?;
    let kv = kernel.eval_all(&spec.beta)?;
    let y = spec.project(x);
    let n = y.len();
    let value = (0..n).map(|a| kv.f[a] * y[a] * y[a]).sum();
    let mut out = FormDerivatives {
        value,
        grad: Vec::new(),
        hess: None,
        mixed: None,
    };
    if order == 0 {
        return Ok(out);
    }
    let m = group.m();
    let e = derivative_blocks(group, spec);
    let f1 = divided_first(&spec.beta, &kv);
    // w_i = (F1 ∘ E_i) y
    let w: Vec<Vec<f64>> = e
        .iter()
        .map(|ei| (0..n).map(|a| (0..n).map(|c| f1[(a, c)] * ei[(a, c)] * y[c]).sum()).collect())
        .collect();
    out.grad = w.iter().map(|wi| crate::linalg::dot(wi, &y)).collect();
    if order == 1 {
        return Ok(out);
    }
    out.mixed = Some(w.iter().map(|wi| spec.basis.matvec(wi).iter().map(|v| 2.0 * v).collect()).collect());
    let v = &spec.basis;
    let vt = v.transpose();
    let u = group.matrices();
    let mut h = Matrix::zeros(m, m);
    let mut f2 = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                f2[(a * n + b) * n + c] = divided_second(&spec.beta, &kv, &f1, a, b, c);
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let mut inner = 0.0;
                    for c in 0..n {
                        let t = e[i][(a, c)] * e[j][(c, b)] + e[j][(a, c)] * e[i][(c, b)];
                        inner += f2[(a * n + c) * n + b] * t;
                    }
                    acc += inner * y[a] * y[b];
                }
            }
            let cij = u[i].transpose().matmul(&u[j]);
            let cij = vt.matmul(&cij.add(&cij.transpose())).matmul(v);
            for a in 0..n {
                for c in 0..n {
                    acc += f1[(a, c)] * cij[(a, c)] * y[a] * y[c];
                }
            }
            h[(i, j)] = acc;
            h[(j, i)] = acc;
        }
    }
    out.hess = Some(h);
    Ok(out)
}

pub fn quadratic_form(group: &Group, kernel: EvenKernel, tau: &[f64], x: &[f64]) -> Result<f64> {
    let spec = spectral(group, tau)?;
    Ok(form_derivatives(group, kernel, &spec, x, 0)?.value)
}

pub fn grad_quadratic_form(group: &Group, kernel: EvenKernel, tau: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let spec = spectral(group, tau)?;
    Ok(form_derivatives(group, kernel, &spec, x, 1)?.grad)
}

pub fn hessian_quadratic_form(group: &Group, kernel: EvenKernel, tau: &[f64], x: &[f64]) -> Result<Mat> {
    let spec = spectral(group, tau)?;
    Ok(form_derivatives(group, kernel, &spec, x, 2)?.hess.expect("order 2 fills the Hessian"))
}

/// `e^{sŨ(τ)} x`, computed blockwise from the spectral data: on the
/// `β`-eigenspace, `e^{sŨ} = cos(sb) I + sin(sb)/b Ũ`.
pub fn exp_u_tilde(spec: &SpectralData, s: f64, x: &[f64]) -> Vec<f64> {
    let y = spec.project(x);
    let n = y.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for a in 0..n {
        let b = spec.beta[a].sqrt();
        c[a] = (s * b).cos() * y[a];
        d[a] = if b * s.abs() < 1e-8 { s } else { (s * b).sin() / b } * y[a];
    }
    let cx = spec.basis.matvec(&c);
    let dx = spec.basis.matvec(&d);
    let udx = spec.u_tilde.matvec(&dx);
    cx.iter().zip(&udx).map(|(a, b)| a + b).collect()
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
    fn spectral_basics() {
        let g = heis();
        let s = spectral(&g, &[1.0]).unwrap();
        assert!((s.beta[0] - 1.0).abs() < 1e-14 && (s.beta[1] - 1.0).abs() < 1e-14);
        let z = spectral(&g, &[0.0]).unwrap();
        assert_eq!(z.beta, vec![0.0, 0.0]);
        let h: Group = builtin_group("htype(4,3)").unwrap();
        let t = [0.6, 0.0, 0.8];
        for b in spectral(&h, &t).unwrap().beta {
            assert!((b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cot_values_and_domain() {
        let g = heis();
        let at0 = apply_even(EvenKernel::Cot, &spectral(&g, &[0.0]).unwrap()).unwrap();
        assert!((at0[(0, 0)] - 1.0).abs() < 1e-15 && at0[(0, 1)].abs() < 1e-15);
        let at1 = apply_even(EvenKernel::Cot, &spectral(&g, &[1.0]).unwrap()).unwrap();
        assert!((at1[(0, 0)] - 1f64 / 1f64.tan()).abs() < 1e-14);
        assert!((at1[(0, 0)] - 0.642093).abs() < 1e-6);
        let err = apply_even(EvenKernel::Cot, &spectral(&g, &[PI]).unwrap());
        assert!(matches!(err, Err(Error::DomainViolation { .. })));
        let q = quadratic_form(&g, EvenKernel::Cot, &[PI / 2.0], &[1.0, 0.0]).unwrap();
        assert!(q.abs() < 1e-15);
        let inv = quadratic_form(&g, EvenKernel::InvSinc, &[0.0], &[0.3, 0.4]).unwrap();
        assert!((inv - 0.25).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_cot_derivatives() {
        let g = heis();
        let gr = grad_quadratic_form(&g, EvenKernel::Cot, &[PI / 2.0], &[1.0, 0.0]).unwrap();
        assert!((gr[0] + PI / 2.0).abs() < 1e-12);
        let h = hessian_quadratic_form(&g, EvenKernel::Cot, &[0.0], &[1.0, 0.0]).unwrap();
        assert!((h[(0, 0)] + 2.0 / 3.0).abs() < 1e-10);
        let zero = grad_quadratic_form(&g, EvenKernel::Cot, &[0.4], &[0.0, 0.0]).unwrap();
        assert_eq!(zero, vec![0.0]);
    }

    #[test]
    fn kernels_match_direct_formulas() {
        for &b in &[1e-3f64, 0.5, 1.7, 2.5, 3.0] {
            let be = b * b;
            let cot = EvenKernel::Cot.eval(be).unwrap()[0];
            assert!((cot - b / b.tan()).abs() < 1e-13);
            let inv = EvenKernel::InvSinc.eval(be).unwrap()[0];
            assert!((inv - b / b.sin()).abs() < 1e-12 * inv);
            let sinc = EvenKernel::Sinc.eval(be).unwrap()[0];
            assert!((sinc - b.sin() / b).abs() < 1e-14);
            let sh = EvenKernel::SinhcDet.eval(be).unwrap()[0];
            assert!((sh - b / b.sinh()).abs() < 1e-14);
        }
        let big = EvenKernel::Sinc.eval(100.0).unwrap()[0];
        assert!((big - 10f64.sin() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let kernels = [
            EvenKernel::Cot,
            EvenKernel::InvSinc,
            EvenKernel::Sinc,
            EvenKernel::SinhcDet,
            EvenKernel::Qk(1),
            EvenKernel::Rk(2),
            EvenKernel::RkHyperbolic(1),
        ];
        for k in kernels {
            for &be in &[0.0, 0.3, 2.0, 6.0, 9.0] {
                let h = 1e-4;
                let [f, d1, d2] = k.eval(be).unwrap();
                let [fp, ..] = k.eval(be + h).unwrap();
                let fm = if be >= h {
                    k.eval(be - h).unwrap()[0]
                } else {
                    k.eval(-h).unwrap_or([f, 0.0, 0.0])[0]
                };
                if be < h {
                    continue;
                }
                let c1 = (fp - fm) / (2.0 * h);
                let c2 = (fp - 2.0 * f + fm) / (h * h);
                assert!((d1 - c1).abs() < 1e-7 * (1.0 + d1.abs()), "{k:?} {be}");
                assert!((d2 - c2).abs() < 1e-4 * (1.0 + d2.abs()), "{k:?} {be}");
            }
        }
    }

    #[test]
    fn exp_u_tilde_rotates() {
        let g = heis();
        let spec = spectral(&g, &[0.7]).unwrap();
        let v = exp_u_tilde(&spec, 1.0, &[1.0, 0.0]);
        assert!((v[0] - 0.7f64.cos()).abs() < 1e-14);
        assert!((v[1].abs() - 0.7f64.sin()).abs() < 1e-14);
    }
}
