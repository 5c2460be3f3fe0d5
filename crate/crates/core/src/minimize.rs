//! Small unconstrained solvers: L-BFGS and Levenberg–Marquardt.

use crate::error::Result;
use crate::linalg::{dot, norm, solve, Matrix};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Limited-memory BFGS with backtracking Armijo steps.
pub fn lbfgs(mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>), x0: &[f64], max_iter: usize, gtol: f64) -> Minimum {
    const MEMORY: usize = 10;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut hist_s: Vec<Vec<f64>> = Vec::new();
    let mut hist_y: Vec<Vec<f64>> = Vec::new();
    let mut it = 0;
    while it < max_iter {
        let gn = norm(&g);
        if gn <= gtol {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist_s.len());
        for (s, y) in hist_s.iter().zip(&hist_y).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &d);
            for i in 0..n {
                d[i] -= a * y[i];
            }
            alphas.push((a, rho));
        }
        if let (Some(s), Some(y)) = (hist_s.last(), hist_y.last()) {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let c = 1.0 / gn.max(1.0);
            d.iter_mut().for_each(|v| *v *= c);
        }
        for ((s, y), (a, rho)) in hist_s.iter().zip(&hist_y).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for i in 0..n {
                d[i] += (a - b) * s[i];
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
            hist_s.clear();
            hist_y.clear();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else { break };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
            hist_s.push(s);
            hist_y.push(y);
            if hist_s.len() > MEMORY {
                hist_s.remove(0);
                hist_y.remove(0);
            }
        }
        let done = (fx - ft).abs() <= 1e-16 * fx.abs().max(1.0);
        x = xt;
        fx = ft;
        g = gt;
        it += 1;
        if done && norm(&g) <= gtol * 1e3 {
            break;
        }
    }
    Minimum {
        grad_norm: norm(&g),
        x,
        value: fx,
        iterations: it,
    }
}

/// Forward-difference Jacobian.
pub fn fd_jacobian(f: &impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], fx: &[f64]) -> Result<Matrix<f64>> {
    let n = x.len();
    let mut jac = Matrix::zeros(fx.len(), n);
    for j in 0..n {
        let h = 1e-7 * (1.0 + x[j].abs());
        let mut xp = x.to_vec();
        xp[j] += h;
        let fp = f(&xp)?;
        for i in 0..fx.len() {
            jac[(i, j)] = (fp[i] - fx[i]) / h;
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt on `|r(x)|²` with a finite-difference Jacobian.
pub fn levenberg_marquardt(r: impl Fn(&[f64]) -> Result<Vec<f64>>, x0: &[f64], max_iter: usize, tol: f64) -> Result<LeastSquares> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut rx = r(&x)?;
    let mut cost = dot(&rx, &rx);
    let mut lambda = 1e-3;
    let mut it = 0;
    while it < max_iter && cost.sqrt() > tol {
        it += 1;
        let jac = fd_jacobian(&r, &x, &rx)?;
        let jt = jac.transpose();
        let jtj = jt.matmul(&jac);
        let jtr = jt.matvec(&rx);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Ok(step) = solve(&a, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a - b).collect();
            let rt = match r(&xt) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let ct = dot(&rt, &rt);
            if ct.is_finite() && ct < cost {
                x = xt;
                rx = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(LeastSquares {
        x,
        residual: cost.sqrt(),
        iterations: it,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let m = lbfgs(f, &[-1.2, 1.0], 500, 1e-10);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lm_solves_nonlinear_system() {
        let r = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]);
        let s = levenberg_marquardt(r, &[1.0, 0.5], 100, 1e-12).unwrap();
        assert!(s.residual < 1e-12);
        assert!((s.x[0] - 2f64.sqrt()).abs() < 1e-9);
    }
}
