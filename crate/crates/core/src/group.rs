//! Step-two Carnot groups `ℝ^q × ℝ^m` with the law
//! `(x, t)·(x', t') = (x + x', t + t' + ½ B(x, x'))`, where
//! `B(x, x')_j = xᵀ U⁽ʲ⁾ x'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymEigen};
use crate::scalar::{Field, Real};

/// The structure data `(q, m, U⁽¹⁾…U⁽ᵐ⁾)` of a step-two group.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTwoGroup<T> {
    q: usize,
    m: usize,
    u: Vec<Matrix<T>>,
}

/// A group element `g = (x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint<T> {
    pub x: Vec<T>,
    pub t: Vec<T>,
}

/// A covector `(ζ, τ)` at the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector<T> {
    pub zeta: Vec<T>,
    pub tau: Vec<T>,
}

fn check_shapes<T: Field>(matrices: &[Matrix<T>]) -> Result<usize> {
    let first = matrices.first().ok_or(Error::DimensionMismatch {
        what: "number of structure matrices",
        expected: 1,
        found: 0,
    })?;
    let q = first.rows();
    if q == 0 {
        return Err(Error::DimensionMismatch {
            what: "horizontal dimension",
            expected: 1,
            found: 0,
        });
    }
    for mat in matrices {
        if !mat.is_square() || mat.rows() != q {
            return Err(Error::DimensionMismatch {
                what: "structure matrix size",
                expected: q,
                found: if mat.rows() != q { mat.rows() } else { mat.cols() },
            });
        }
    }
    for (j, mat) in matrices.iter().enumerate() {
        if !mat.is_skew() {
            return Err(Error::NotSkewSymmetric(j + 1));
        }
    }
    Ok(q)
}

/// Validates floating-point structure matrices: exact skew-symmetry and
/// linear independence, the latter judged by the singular values of the
/// `m × q²` stacking (threshold `1e-10` relative to the largest).
pub fn validate_group<T: Real>(matrices: Vec<Matrix<T>>) -> Result<StepTwoGroup<T>> {
    let q = check_shapes(&matrices)?;
    let m = matrices.len();
    // Gram matrix of the stacking: its eigenvalues are the squared singular values.
    let gram = Matrix::from_fn(m, m, |a, b| {
        matrices[a]
            .as_slice()
            .iter()
            .zip(matrices[b].as_slice())
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    });
    let eig = SymEigen::new(&gram)?;
    let smax = eig.max_value().max(T::zero()).sqrt();
    let smin = eig.min_value().max(T::zero()).sqrt();
    if smax == T::zero() || smin <= T::c(1e-10) * smax {
        return Err(Error::LinearlyDependent);
    }
    Ok(StepTwoGroup { q, m, u: matrices })
}

/// Validation for exact scalar types (e.g. rationals): independence is
/// decided by exact Gaussian elimination.
pub fn validate_group_exact<T: Field>(matrices: Vec<Matrix<T>>) -> Result<StepTwoGroup<T>> {
    let q = check_shapes(&matrices)?;
    let m = matrices.len();
    let mut rows: Vec<Vec<T>> = matrices.iter().map(|u| u.as_slice().to_vec()).collect();
    let mut rank = 0;
    for col in 0..q * q {
        let Some(p) = (rank..m).find(|&r| rows[r][col] != T::zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in (rank + 1)..m {
            let f = rows[r][col] / pivot[col];
            for (v, &pv) in rows[r].iter_mut().zip(&pivot) {
                *v = *v - f * pv;
            }
        }
        rank += 1;
    }
    if rank < m {
        return Err(Error::LinearlyDependent);
    }
    Ok(StepTwoGroup { q, m, u: matrices })
}

impl<T: Field> StepTwoGroup<T> {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrices(&self) -> &[Matrix<T>] {
        &self.u
    }

    pub fn identity(&self) -> GroupPoint<T> {
        GroupPoint {
            x: vec![T::zero(); self.q],
            t: vec![T::zero(); self.m],
        }
    }

    pub fn check_point(&self, g: &GroupPoint<T>) -> Result<()> {
        self.check_horizontal(&g.x)?;
        self.check_vertical(&g.t)
    }

    pub fn check_horizontal(&self, x: &[T]) -> Result<()> {
        if x.len() != self.q {
            return Err(Error::DimensionMismatch {
                what: "horizontal vector",
                expected: self.q,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn check_vertical(&self, t: &[T]) -> Result<()> {
        if t.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "vertical vector",
                expected: self.m,
                found: t.len(),
            });
        }
        Ok(())
    }

    /// `B(x, y)_j = xᵀ U⁽ʲ⁾ y`.
    pub fn bracket(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.u.iter().map(|u| u.bilinear(x, y)).collect()
    }

    pub fn multiply(&self, g: &GroupPoint<T>, h: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check_point(g)?;
        self.check_point(h)?;
        let b = self.bracket(&g.x, &h.x);
        let half = T::half();
        Ok(GroupPoint {
            x: g.x.iter().zip(&h.x).map(|(&a, &c)| a + c).collect(),
            t: g.t.iter().zip(&h.t).zip(&b).map(|((&a, &c), &bj)| a + c + half * bj).collect(),
        })
    }

    pub fn inverse(&self, g: &GroupPoint<T>) -> GroupPoint<T> {
        GroupPoint {
            x: g.x.iter().map(|&v| -v).collect(),
            t: g.t.iter().map(|&v| -v).collect(),
        }
    }

    /// `Ũ(τ) = Σ τ_j U⁽ʲ⁾`.
    pub fn u_tilde(&self, tau: &[T]) -> Result<Matrix<T>> {
        self.check_vertical(tau)?;
        let mut out = Matrix::zeros(self.q, self.q);
        for (u, &tj) in self.u.iter().zip(tau) {
            if tj != T::zero() {
                out.axpy(tj, u);
            }
        }
        Ok(out)
    }

    /// Converts the structure matrices to another scalar type.
    pub fn map_scalar<S: Field>(&self, f: impl Fn(T) -> S) -> StepTwoGroup<S> {
        StepTwoGroup {
            q: self.q,
            m: self.m,
            u: self.u.iter().map(|u| Matrix::from_fn(self.q, self.q, |i, j| f(u[(i, j)]))).collect(),
        }
    }
}

impl<T: Real> StepTwoGroup<T> {
    /// Carnot dilation `(x, t) ↦ (r x, r² t)`.
    pub fn dilate(&self, g: &GroupPoint<T>, r: T) -> Result<GroupPoint<T>> {
        if !(r > T::zero()) {
            return Err(Error::NonPositiveScale(r.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(GroupPoint {
            x: g.x.iter().map(|&v| r * v).collect(),
            t: g.t.iter().map(|&v| r * r * v).collect(),
        })
    }
}

impl<T: Field> GroupPoint<T> {
    pub fn new(x: Vec<T>, t: Vec<T>) -> Self {
        Self { x, t }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.t).all(|&v| v == T::zero())
    }
}

impl<T: Real> GroupPoint<T> {
    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.t).all(|v| v.is_finite())
    }

    /// Euclidean norm of the stacked coordinates.
    pub fn euclidean_norm(&self) -> T {
        self.x.iter().chain(&self.t).fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    /// Homogeneous size `1 + |x|² + Σ|t_j|` used for scale-relative tolerances.
    pub fn scale(&self) -> T {
        T::one() + self.x.iter().fold(T::zero(), |a, &v| a + v * v) + self.t.iter().fold(T::zero(), |a, &v| a + v.abs())
    }
}

fn skew_from_pairs<T: Real>(q: usize, entries: &[(usize, usize, f64)]) -> Matrix<T> {
    let mut m = Matrix::zeros(q, q);
    for &(i, j, v) in entries {
        m[(i, j)] = T::c(v);
        m[(j, i)] = T::c(-v);
    }
    m
}

fn quaternion_units<T: Real>() -> [Matrix<T>; 3] {
    // left multiplication by i, j, k on the basis (1, i, j, k)
    [
        skew_from_pairs(4, &[(1, 0, 1.0), (3, 2, 1.0)]),
        skew_from_pairs(4, &[(2, 0, 1.0), (1, 3, 1.0)]),
        skew_from_pairs(4, &[(3, 0, 1.0), (2, 1, 1.0)]),
    ]
}

fn block_diag<T: Real>(block: &Matrix<T>, copies: usize) -> Matrix<T> {
    let b = block.rows();
    let mut out = Matrix::zeros(b * copies, b * copies);
    for c in 0..copies {
        for i in 0..b {
            for j in 0..b {
                out[(c * b + i, c * b + j)] = block[(i, j)];
            }
        }
    }
    out
}

fn parse_args(name: &str) -> Result<(String, Vec<usize>)> {
    let name = name.trim().to_ascii_lowercase();
    match name.find('(') {
        None => Ok((name, Vec::new())),
        Some(open) => {
            let close = name.rfind(')').filter(|&c| c > open).ok_or_else(|| Error::UnknownFixture(name.clone()))?;
            let args = name[open + 1..close]
                .split(',')
                .map(|a| a.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::UnknownFixture(name.clone()))?;
            Ok((name[..open].trim().to_string(), args))
        }
    }
}

/// Named fixture groups: `heisenberg(n)`, `htype(q,m)`, `corank1(q)`,
/// `n32` and `kolmogorov(q)`.
pub fn builtin_group<T: Real>(name: &str) -> Result<StepTwoGroup<T>> {
    let unknown = || Error::UnknownFixture(name.to_string());
    let (base, args) = parse_args(name)?;
    let mats: Vec<Matrix<T>> = match (base.as_str(), args.as_slice()) {
        ("heisenberg", []) => vec![skew_from_pairs(2, &[(0, 1, 1.0)])],
        ("heisenberg", &[n]) if n >= 1 => {
            vec![block_diag(&skew_from_pairs(2, &[(0, 1, 1.0)]), n)]
        }
        ("htype", &[q, 1]) if q >= 2 && q % 2 == 0 => {
            vec![block_diag(&skew_from_pairs(2, &[(0, 1, 1.0)]), q / 2)]
        }
        ("htype", &[q, m]) if q >= 4 && q % 4 == 0 && (2..=3).contains(&m) => quaternion_units().iter().take(m).map(|u| block_diag(u, q / 4)).collect(),
        ("corank1", &[q]) if q >= 2 => {
            let pairs: Vec<(usize, usize, f64)> = (0..q / 2).map(|b| (2 * b, 2 * b + 1, (b + 1) as f64)).collect();
            vec![skew_from_pairs(q, &pairs)]
        }
        ("n32", []) => vec![
            skew_from_pairs(3, &[(1, 2, 1.0)]),
            skew_from_pairs(3, &[(2, 0, 1.0)]),
            skew_from_pairs(3, &[(0, 1, 1.0)]),
        ],
        ("kolmogorov", &[q]) if q >= 2 => (0..q - 1).map(|j| skew_from_pairs(q, &[(j, q - 1, 1.0)])).collect(),
        _ => return Err(unknown()),
    };
    validate_group(mats)
}

/// On-disk group description `{"q": .., "m": .., "U": [[[row], ..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub q: usize,
    pub m: usize,
    #[serde(rename = "U")]
    pub u: Vec<Vec<Vec<f64>>>,
}

impl GroupSpec {
    pub fn from_group(group: &StepTwoGroup<f64>) -> Self {
        Self {
            q: group.q,
            m: group.m,
            u: group.u.iter().map(Matrix::to_rows).collect(),
        }
    }

    pub fn into_group(self) -> Result<StepTwoGroup<f64>> {
        if self.u.len() != self.m {
            return Err(Error::Parse(format!("\"U\" has {} matrices but m = {}", self.u.len(), self.m)));
        }
        let mut mats = Vec::with_capacity(self.m);
        for (j, rows) in self.u.iter().enumerate() {
            if rows.len() != self.q {
                return Err(Error::Parse(format!("U[{j}] has {} rows, expected q = {}", rows.len(), self.q)));
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != self.q {
                    return Err(Error::Parse(format!("U[{j}][{r}] has {} entries, expected q = {}", row.len(), self.q)));
                }
                if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Parse(format!("U[{j}][{r}][{c}] is not finite")));
                }
            }
            mats.push(Matrix::from_rows(rows)?);
        }
        validate_group(mats)
    }
}

/// Parses a group-spec JSON document.
pub fn parse_group_json(text: &str) -> Result<StepTwoGroup<f64>> {
    let spec: GroupSpec = serde_json::from_str(text)?;
    spec.into_group()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_rational::Ratio;

    fn heis() -> StepTwoGroup<f64> {
        builtin_group("heisenberg(1)").unwrap()
    }

    #[test]
    fn validates_heisenberg_matrix() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let g = validate_group(vec![m.clone()]).unwrap();
        assert_eq!((g.q(), g.m()), (2, 1));
        assert_eq!(g.matrices()[0], m);
    }

    #[test]
    fn rejects_symmetric() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(validate_group(vec![m]), Err(Error::NotSkewSymmetric(1))));
    }

    #[test]
    fn rejects_dependent() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let b = a.scale(2.0);
        assert!(matches!(validate_group(vec![a, b]), Err(Error::LinearlyDependent)));
    }

    #[test]
    fn rejects_shapes() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let b = Matrix::<f64>::zeros(3, 3);
        assert!(matches!(validate_group(vec![a, b]), Err(Error::DimensionMismatch { .. })));
        assert!(validate_group::<f64>(vec![]).is_err());
    }

    #[test]
    fn heisenberg_product() {
        let g = heis();
        let a = GroupPoint::new(vec![1.0, 0.0], vec![0.0]);
        let b = GroupPoint::new(vec![0.0, 1.0], vec![0.0]);
        let p = g.multiply(&a, &b).unwrap();
        assert_eq!(p.x, vec![1.0, 1.0]);
        assert_eq!(p.t, vec![0.5]);
    }

    #[test]
    fn inverse_and_identity() {
        let g = heis();
        let a = GroupPoint::new(vec![1.0, 0.0], vec![1.0]);
        let inv = g.inverse(&a);
        assert_eq!(inv, GroupPoint::new(vec![-1.0, 0.0], vec![-1.0]));
        let o = g.identity();
        assert_eq!(g.inverse(&o), o);
        assert!(g.multiply(&a, &inv).unwrap().is_identity());
        assert_eq!(g.multiply(&o, &a).unwrap(), a);
    }

    #[test]
    fn dilation() {
        let g = heis();
        let a = GroupPoint::new(vec![1.0, 0.0], vec![1.0]);
        assert_eq!(g.dilate(&a, 1.0).unwrap(), a);
        assert_eq!(g.dilate(&a, 2.0).unwrap(), GroupPoint::new(vec![2.0, 0.0], vec![4.0]));
        assert!(matches!(g.dilate(&a, 0.0), Err(Error::NonPositiveScale(_))));
    }

    #[test]
    fn u_tilde_values() {
        let g = heis();
        assert_eq!(g.u_tilde(&[0.0]).unwrap(), Matrix::zeros(2, 2));
        let pi = std::f64::consts::PI;
        let u = g.u_tilde(&[pi]).unwrap();
        assert_eq!(u[(0, 1)], pi);
        assert_eq!(u[(1, 0)], -pi);
        assert!(g.u_tilde(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn fixtures() {
        let n32 = builtin_group::<f64>("n32").unwrap();
        assert_eq!((n32.q(), n32.m()), (3, 3));
        let h = builtin_group::<f64>("heisenberg(2)").unwrap();
        assert_eq!((h.q(), h.m()), (4, 1));
        let c = builtin_group::<f64>("corank1(5)").unwrap();
        assert_eq!((c.q(), c.m()), (5, 1));
        let k = builtin_group::<f64>("kolmogorov(4)").unwrap();
        assert_eq!((k.q(), k.m()), (4, 3));
        assert!(matches!(builtin_group::<f64>("sol3"), Err(Error::UnknownFixture(_))));
        assert!(builtin_group::<f64>("htype(6,3)").is_err());
    }

    #[test]
    fn htype_anticommuting_units() {
        let g = builtin_group::<f64>("htype(4,3)").unwrap();
        let tau = [0.3, -1.1, 0.7];
        let u = g.u_tilde(&tau).unwrap();
        let n2: f64 = tau.iter().map(|v| v * v).sum();
        let sq = u.matmul(&u);
        assert!(sq.add(&Matrix::identity(4).scale(n2)).max_abs() < 1e-14);
        for a in 0..3 {
            let ua = &g.matrices()[a];
            assert!(ua.matmul(ua).add(&Matrix::identity(4)).max_abs() == 0.0);
        }
    }

    #[test]
    fn exact_rational_group_law() {
        type Q = Ratio<i64>;
        let f = heis();
        let g: StepTwoGroup<Q> = f.map_scalar(|v| Q::from_integer(v as i64));
        let g = validate_group_exact(g.matrices().to_vec()).unwrap();
        let a = GroupPoint::new(vec![Q::new(1, 3), Q::new(-2, 5)], vec![Q::new(7, 2)]);
        let b = GroupPoint::new(vec![Q::new(3, 4), Q::new(1, 1)], vec![Q::new(-1, 6)]);
        let c = GroupPoint::new(vec![Q::new(-5, 7), Q::new(2, 9)], vec![Q::new(1, 8)]);
        let ab_c = g.multiply(&g.multiply(&a, &b).unwrap(), &c).unwrap();
        let a_bc = g.multiply(&a, &g.multiply(&b, &c).unwrap()).unwrap();
        assert_eq!(ab_c, a_bc);
        let dep = vec![f.matrices()[0].clone(), f.matrices()[0].scale(3.0)];
        let dep: Vec<Matrix<Q>> = dep.iter().map(|m| Matrix::from_fn(2, 2, |i, j| Q::from_integer(m[(i, j)] as i64))).collect();
        assert!(matches!(validate_group_exact(dep), Err(Error::LinearlyDependent)));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let g = builtin_group::<f64>("n32").unwrap();
        let text = serde_json::to_string(&GroupSpec::from_group(&g)).unwrap();
        assert_eq!(parse_group_json(&text).unwrap(), g);
        let bad = r#"{"q": 2, "m": 1, "U": [[[0, 1], [-1, 0, 3]]]}"#;
        let err = parse_group_json(bad).unwrap_err().to_string();
        assert!(err.contains("U[0][1]"), "{err}");
        assert!(matches!(parse_group_json("{\"q\": 2,"), Err(Error::Json(_))));
    }

    #[test]
    fn f32_fixture() {
        let g = builtin_group::<f32>("heisenberg(1)").unwrap();
        let a = GroupPoint::new(vec![1.0f32, 2.0], vec![0.5]);
        let d = g.dilate(&a, 0.5).unwrap();
        assert_relative_eq!(d.t[0], 0.125);
    }
}
