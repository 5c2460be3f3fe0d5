//! Half-integer order Bessel machinery.
//!
//! `Q_k(z) = z^{-(k+½)} I_{k+½}(z)` is even and entire, so it is handled as a
//! function of `w = z²`. Negative `w` corresponds to the imaginary axis, where
//! `Q_k` vanishes at `w = -Z_{k,l}²`, the squared zeros of `J_{k+½}`.
//! `R_k(w) = w Q_{k+1}(w) / Q_k(w)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest level accepted by the public evaluators.
pub const MAX_LEVEL: usize = 32;
/// Headroom for derivative formulas, which reach `Q_{k+3}`.
const MAX_INTERNAL: usize = MAX_LEVEL + 4;
/// `√(2/π)`, the value of `Q_0` at the origin.
pub const Q0_AT_ZERO: f64 = 0.797_884_560_802_865_4;
/// Stored zeros per level in a default [`BesselTable`].
pub const DEFAULT_ZEROS_PER_LEVEL: usize = 64;

fn check_level(k: usize, limit: usize) -> Result<()> {
    if k > limit {
        return Err(Error::LevelTooLarge(k));
    }
    Ok(())
}

/// `2^{-(k+½)} / Γ(k + 3/2)`, the leading series coefficient.
fn leading_coefficient(k: usize) -> f64 {
    // Γ(3/2) = √π / 2
    let mut gamma = PI.sqrt() / 2.0;
    for j in 1..=k {
        gamma *= j as f64 + 0.5;
    }
    2f64.powf(-(k as f64 + 0.5)) / gamma
}

/// Spherical Bessel `j_n(b)` for `n ≤ k` by upward recurrence (stable for
/// `b ≳ n`, which holds at every zero).
pub(crate) fn spherical_j(k: usize, b: f64) -> (f64, f64) {
    let (s, c) = b.sin_cos();
    let j0 = s / b;
    if k == 0 {
        return (j0, s / (b * b) - c / b);
    }
    let mut prev = j0;
    let mut cur = s / (b * b) - c / b;
    for n in 1..k {
        let next = (2 * n + 1) as f64 / b * cur - prev;
        prev = cur;
        cur = next;
    }
    // j_k and j_{k-1}
    (cur, prev)
}

fn spherical_j_with_derivative(k: usize, b: f64) -> (f64, f64) {
    if k == 0 {
        let (j0, j1) = spherical_j(0, b);
        return (j0, -j1);
    }
    let (jk, jkm1) = spherical_j(k, b);
    (jk, jkm1 - (k as f64 + 1.0) / b * jk)
}

fn find_zero(k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    let f = |b: f64| spherical_j_with_derivative(k, b);
    let (mut flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::ConvergenceFailure(format!("no sign change for order {k} on [{lo}, {hi}]")));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x || hi - lo <= 4.0 * f64::EPSILON * x {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::ConvergenceFailure(format!("zero of order {k} near {x}")))
}

/// Zeros `Z_{j,l}`, `j ≤ k`, `l ≤ count`, built level by level from the
/// interlacing `Z_{j-1,l} < Z_{j,l} < Z_{j-1,l+1}`.
pub fn zero_ladder(k: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    check_level(k, MAX_INTERNAL)?;
    let mut prev: Vec<f64> = (1..=count + k).map(|l| l as f64 * PI).collect();
    let mut out = Vec::with_capacity(k + 1);
    out.push(prev[..count].to_vec());
    for j in 1..=k {
        let cur = prev.windows(2).map(|w| find_zero(j, w[0], w[1])).collect::<Result<Vec<_>>>()?;
        out.push(cur[..count].to_vec());
        prev = cur;
    }
    Ok(out)
}

/// The `l`-th positive zero of `J_{k+½}`.
pub fn bessel_zero(k: usize, l: usize) -> Result<f64> {
    check_level(k, MAX_INTERNAL)?;
    if l == 0 {
        return Err(Error::InvalidArgument("zero index starts at 1".into()));
    }
    if k == 0 {
        return Ok(l as f64 * PI);
    }
    Ok(zero_ladder(k, l)?[k][l - 1])
}

/// `Z_{k,1}`, cached for every internal level.
pub fn first_zero(k: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = CACHE.get_or_init(|| zero_ladder(MAX_INTERNAL, 1).expect("first zeros converge").into_iter().map(|v| v[0]).collect());
    table[k]
}

/// Zeros `Z_{k,l}` for `k ≤ k_max`, `l ≤ count`; further zeros are computed
/// on demand.
#[derive(Debug, Clone)]
pub struct BesselTable {
    k_max: usize,
    zeros: Vec<Vec<f64>>,
}

impl BesselTable {
    pub fn new(k_max: usize, count: usize) -> Result<Self> {
        check_level(k_max, MAX_LEVEL)?;
        let zeros = zero_ladder(k_max, count)?;
        Ok(Self { k_max, zeros })
    }

    pub fn with_defaults() -> Result<Self> {
        Self::new(MAX_LEVEL, DEFAULT_ZEROS_PER_LEVEL)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn stored(&self, k: usize) -> &[f64] {
        &self.zeros[k]
    }

    pub fn zero(&self, k: usize, l: usize) -> Result<f64> {
        check_level(k, self.k_max)?;
        match self.zeros[k].get(l.wrapping_sub(1)) {
            Some(&z) => Ok(z),
            None => bessel_zero(k, l),
        }
    }
}

pub(crate) fn series(k: usize, w: f64) -> f64 {
    let nu = k as f64 + 0.5;
    let mut term = leading_coefficient(k);
    let mut sum = term;
    let x = w / 4.0;
    for n in 1..2000 {
        let nf = n as f64;
        term *= x / (nf * (nu + nf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && nf * (nu + nf) > x.abs() {
            break;
        }
    }
    sum
}

fn ln_series_complex(k: usize, w: Complex64) -> Complex64 {
    // log-space summation for large |w|; terms are generated in log form
    let nu = k as f64 + 0.5;
    let lx = (w / 4.0).ln();
    let mut lt = Complex64::new(leading_coefficient(k).ln(), 0.0);
    let mut logs = vec![lt];
    let xa = (w / 4.0).norm();
    for n in 1..20000 {
        let nf = n as f64;
        lt += lx - (nf * (nu + nf)).ln();
        logs.push(lt);
        if nf * (nu + nf) > xa && lt.re < logs.iter().fold(f64::MIN, |a, l| a.max(l.re)) - 40.0 {
            break;
        }
    }
    let mx = logs.iter().fold(f64::MIN, |a, l| a.max(l.re));
    let sum: Complex64 = logs.iter().map(|l| (l - mx).exp()).sum();
    sum.ln() + mx
}

/// `ln Q_k` from the finite closed form of `i_k`, valid once
/// `Re z ≥ (k+1)² + 20` (the `e^{-2z}` branch is dropped).
fn ln_closed_form(k: usize, z: Complex64) -> Complex64 {
    let mut a = 1.0;
    let mut sum = Complex64::new(1.0, 0.0);
    let inv = 1.0 / (2.0 * z);
    let mut p = Complex64::new(1.0, 0.0);
    for j in 0..k {
        // a_{k,j+1} = a_{k,j} (k+j+1)(k-j) / (j+1)
        a *= ((k + j + 1) * (k - j)) as f64 / (j + 1) as f64;
        p *= -inv;
        sum += p * a;
    }
    Q0_AT_ZERO.ln() + z - (2.0 * z).ln() - (k as f64) * z.ln() + sum.ln()
}

fn closed_form_threshold(k: usize) -> f64 {
    let k1 = (k + 1) as f64;
    k1 * k1 + 20.0
}

fn check_domain(k: usize, w: f64) -> Result<()> {
    let z1 = first_zero(k);
    if !(w > -z1 * z1) || !w.is_finite() {
        return Err(Error::DomainViolation {
            index: 0,
            value: w,
            limit: -z1 * z1,
        });
    }
    Ok(())
}

/// `Q_k` at `z² = w`, for `w > -Z_{k,1}²`.
pub fn q_k(k: usize, w: f64) -> Result<f64> {
    check_level(k, MAX_INTERNAL)?;
    check_domain(k, w)?;
    if w > 1e4 {
        return Ok(ln_q_k_unchecked(k, w).exp());
    }
    Ok(series(k, w))
}

fn ln_q_k_unchecked(k: usize, w: f64) -> f64 {
    if w <= 1e4 {
        return series(k, w).ln();
    }
    let z = w.sqrt();
    if z >= closed_form_threshold(k) {
        ln_closed_form(k, Complex64::new(z, 0.0)).re
    } else {
        ln_series_complex(k, Complex64::new(w, 0.0)).re
    }
}

/// `ln Q_k(w)`; finite for all `w` in the domain, including large positive `w`
/// where `Q_k` itself overflows.
pub fn ln_q_k(k: usize, w: f64) -> Result<f64> {
    check_level(k, MAX_INTERNAL)?;
    check_domain(k, w)?;
    Ok(ln_q_k_unchecked(k, w))
}

/// Ratios `Q_{k+j}(w) / Q_k(w)` for `j = 1..=n`.
pub fn q_ratios(k: usize, w: f64, n: usize) -> Result<Vec<f64>> {
    check_level(k + n, MAX_INTERNAL)?;
    check_domain(k, w)?;
    if w > 1e4 {
        let base = ln_q_k_unchecked(k, w);
        return Ok((1..=n).map(|j| (ln_q_k_unchecked(k + j, w) - base).exp()).collect());
    }
    let base = series(k, w);
    Ok((1..=n).map(|j| series(k + j, w) / base).collect())
}

/// `R_k(w) = w Q_{k+1}(w) / Q_k(w)`.
pub fn r_k(k: usize, w: f64) -> Result<f64> {
    check_level(k, MAX_LEVEL)?;
    Ok(w * q_ratios(k, w, 1)?[0])
}

/// `R_k` with its first two derivatives in `w`, from `dQ_k/dw = Q_{k+1}/2`.
pub fn r_k_derivatives(k: usize, w: f64) -> Result<[f64; 3]> {
    check_level(k, MAX_LEVEL)?;
    let r = q_ratios(k, w, 3)?;
    let (r1, r2, r3) = (r[0], r[1], r[2]);
    let d1 = 0.5 * (r2 - r1 * r1);
    let dr2 = 0.5 * (r3 - r2 * r1);
    let d2 = 0.5 * (dr2 - 2.0 * r1 * d1);
    Ok([w * r1, r1 + w * d1, 2.0 * d1 + w * d2])
}

/// Complex `ln Q_k(w)`; `exp` of it is branch independent.
pub fn ln_q_k_complex(k: usize, w: Complex64) -> Result<Complex64> {
    check_level(k, MAX_INTERNAL)?;
    if w.norm() <= 1e4 {
        return Ok(series_complex(k, w).ln());
    }
    let mut z = w.sqrt();
    if z.re < 0.0 {
        z = -z;
    }
    if z.re >= closed_form_threshold(k) && z.re >= 0.5 * z.norm() {
        Ok(ln_closed_form(k, z))
    } else {
        Ok(ln_series_complex(k, w))
    }
}

fn series_complex(k: usize, w: Complex64) -> Complex64 {
    let nu = k as f64 + 0.5;
    let mut term = Complex64::new(leading_coefficient(k), 0.0);
    let mut sum = term;
    let x = w / 4.0;
    for n in 1..4000 {
        let nf = n as f64;
        term *= x / (nf * (nu + nf));
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && nf * (nu + nf) > x.norm() {
            break;
        }
    }
    sum
}

/// Complex `Q_k(w)`.
pub fn q_k_complex(k: usize, w: Complex64) -> Result<Complex64> {
    Ok(ln_q_k_complex(k, w)?.exp())
}

/// Complex `R_k(w)`.
pub fn r_k_complex(k: usize, w: Complex64) -> Result<Complex64> {
    check_level(k, MAX_LEVEL)?;
    if w.norm() <= 1e4 {
        return Ok(w * series_complex(k + 1, w) / series_complex(k, w));
    }
    Ok(w * (ln_q_k_complex(k + 1, w)? - ln_q_k_complex(k, w)?).exp())
}

/// Truncated partial-fraction value of `R_k` with a rigorous tail bound and a
/// tail-corrected estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub value: f64,
    pub tail_bound: f64,
    pub corrected: f64,
}

/// `2 Σ_{l ≤ L} w / (Z_{k,l}² + w)`.
pub fn r_k_series(k: usize, w: f64, terms: usize) -> Result<SeriesEstimate> {
    check_level(k, MAX_LEVEL)?;
    check_domain(k, w)?;
    if terms == 0 {
        return Err(Error::InvalidArgument("series needs at least one term".into()));
    }
    let zeros = zero_ladder(k, terms)?.pop().unwrap_or_default();
    let sum: f64 = zeros.iter().map(|z| w / (z * z + w)).sum();
    let last = zeros[terms - 1];
    let value = 2.0 * sum;
    // zero spacing exceeds π, so Σ_{l>L} Z_{k,l}^{-2} ≤ 1 / (π Z_{k,L})
    let inv_sq_tail = 1.0 / (PI * last);
    let shrink = if w < 0.0 { 1.0 / (1.0 - (-w) / (last * last)) } else { 1.0 };
    let tail_bound = 2.0 * w.abs() * inv_sq_tail * shrink;
    // McMahon: Z_{k,l} ≈ (l + k/2) π, so Σ_{l>L} Z^{-2} ≈ 1 / (π² (L + k/2 + ½))
    let tail_estimate = 2.0 * w / (PI * PI * (terms as f64 + k as f64 / 2.0 + 0.5));
    Ok(SeriesEstimate {
        value,
        tail_bound,
        corrected: value + tail_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zeros_of_order_half() {
        assert_relative_eq!(bessel_zero(0, 3).unwrap(), 3.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn first_zero_order_three_halves_matches_tan_oracle() {
        // j_1 zeros solve tan z = z
        let oracle = bisect(|z| z.tan() - z, PI + 1e-9, 1.5 * PI - 1e-9);
        assert!((oracle - 4.493409457909064).abs() < 1e-12);
        assert!((bessel_zero(1, 1).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_of_order_five_halves_interlaces() {
        let z11 = bessel_zero(1, 1).unwrap();
        let z21 = bessel_zero(2, 1).unwrap();
        let z12 = bessel_zero(1, 2).unwrap();
        assert!(z11 < z21 && z21 < z12);
    }

    #[test]
    fn q0_values() {
        assert_relative_eq!(q_k(0, 0.0).unwrap(), Q0_AT_ZERO, max_relative = 1e-15);
        assert_relative_eq!(q_k(0, 1.0).unwrap(), Q0_AT_ZERO * 1f64.sinh(), max_relative = 1e-14);
        let near = q_k(0, -PI * PI + 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-9);
        assert!(matches!(q_k(0, -PI * PI), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn q_closed_form_branch_matches_series() {
        for k in [0usize, 1, 3] {
            let w = 2.0e4;
            let direct = series(k, w).ln();
            assert_relative_eq!(ln_q_k(k, w).unwrap(), direct, max_relative = 1e-13);
            let w2 = 1.0e6;
            let ls = ln_series_complex(k, Complex64::new(w2, 0.0)).re;
            let cf = ln_closed_form(k, Complex64::new(w2.sqrt(), 0.0)).re;
            assert_relative_eq!(ls, cf, max_relative = 1e-13);
        }
    }

    #[test]
    fn r0_values() {
        assert_eq!(r_k(0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(r_k(0, 1.0).unwrap(), 1f64 / 1f64.tanh() - 1.0, max_relative = 1e-14);
        assert_relative_eq!(r_k(0, -1.0).unwrap(), 1f64 / 1f64.tan() - 1.0, max_relative = 1e-14);
        assert_relative_eq!(r_k(0, -1.0).unwrap(), -0.357_907_4, epsilon = 1e-7);
    }

    #[test]
    fn series_oracle_agrees() {
        let closed = r_k(0, 1.0).unwrap();
        let s = r_k_series(0, 1.0, 10_000).unwrap();
        assert!(s.tail_bound <= 1e-3);
        assert!((s.value - closed).abs() <= s.tail_bound);
        assert!((s.corrected - closed).abs() <= 1e-8);
        let s1 = r_k_series(1, 4.0, 10_000).unwrap();
        assert!((s1.value - r_k(1, 4.0).unwrap()).abs() <= s1.tail_bound);
        assert_eq!(r_k_series(2, 0.0, 5).unwrap().value, 0.0);
    }

    #[test]
    fn derivative_formulas_match_finite_differences() {
        for k in [0usize, 1, 2, 5] {
            for &w in &[-5.0, -0.5, 0.0, 0.3, 7.0, 40.0] {
                if w <= -first_zero(k).powi(2) {
                    continue;
                }
                let [r, d1, d2] = r_k_derivatives(k, w).unwrap();
                let h = 1e-4;
                let rp = r_k(k, w + h).unwrap();
                let rm = r_k(k, w - h).unwrap();
                assert_relative_eq!(r, r_k(k, w).unwrap(), max_relative = 1e-14);
                assert!((d1 - (rp - rm) / (2.0 * h)).abs() <= 1e-7 * (1.0 + d1.abs()));
                assert!((d2 - (rp - 2.0 * r + rm) / (h * h)).abs() <= 1e-4 * (1.0 + d2.abs()));
            }
        }
    }

    #[test]
    fn complex_matches_real() {
        for k in [0usize, 2, 4] {
            for &w in &[-3.0, 0.0, 2.5, 150.0, 3.0e4, 5.0e6] {
                let re = ln_q_k(k, w).unwrap();
                let c = ln_q_k_complex(k, Complex64::new(w, 0.0)).unwrap();
                assert_relative_eq!(c.re, re, max_relative = 1e-12, epsilon = 1e-14);
                assert!(c.im.abs() < 1e-10);
            }
        }
        // Q_0(z) = √(2/π) sinh z / z at complex z
        let z = Complex64::new(3.0, 1.2);
        let expect = Q0_AT_ZERO * z.sinh() / z;
        let got = q_k_complex(0, z * z).unwrap();
        assert!((got - expect).norm() < 1e-13 * expect.norm());
        let zb = Complex64::new(140.0, 2.0);
        let lg = ln_q_k_complex(0, zb * zb).unwrap();
        let le = Q0_AT_ZERO.ln() + zb.sinh().ln() - zb.ln();
        assert!((lg.exp() / le.exp() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn table_defaults_and_level_cap() {
        let t = BesselTable::new(3, 8).unwrap();
        assert_eq!(t.stored(2).len(), 8);
        assert_relative_eq!(t.zero(0, 20).unwrap(), 20.0 * PI, max_relative = 1e-15);
        assert!(matches!(BesselTable::new(33, 4), Err(Error::LevelTooLarge(33))));
        assert!(matches!(r_k(33, 0.0), Err(Error::LevelTooLarge(33))));
    }
}
