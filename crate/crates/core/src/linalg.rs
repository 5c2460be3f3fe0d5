//! Small dense linear algebra: row-major matrices, a cyclic Jacobi
//! symmetric eigensolver and LU solves. Sizes here are tiny (q, m <= 16),
//! so nothing is blocked or vectorized.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{Field, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Field> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * a).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + a * y;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v`
    pub fn tmatvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tmatvec shape");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.matvec(y))
    }

    /// Exact entrywise test of `Aᵀ = -A`.
    pub fn is_skew(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)] == -self[(j, i)]))
    }
}

impl<T: Real> Matrix<T> {
    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn symmetrize(&mut self) {
        let two = T::one() + T::one();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) / two;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Field>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm2<T: Field>(a: &[T]) -> T {
    dot(a, a)
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending,
/// eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEigen<T> {
    /// Cyclic Jacobi rotations; accurate to a few ulps relative to ‖A‖.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square(), "eigen of non-square matrix");
        let n = a.rows();
        let mut m = a.clone();
        m.symmetrize();
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();
        let scale = m.frobenius();
        if scale == T::zero() || n < 2 {
            return Ok(Self::sorted(m, v));
        }
        if !scale.is_finite() {
            return Err(Error::EigenFailure);
        }
        let two = T::c(2.0);
        let tol = T::c(1e-3) * eps * scale;
        let skip = tol / T::c(n as f64);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + m[(i, j)] * m[(i, j)];
                }
            }
            if off.sqrt() <= tol || off == T::zero() {
                return Ok(Self::sorted(m, v));
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq.abs() <= skip {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    m[(p, q)] = T::zero();
                    m[(q, p)] = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        Err(Error::EigenFailure)
    }

    fn sorted(m: Matrix<T>, v: Matrix<T>) -> Self {
        let n = m.rows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| m[(a, a)].partial_cmp(&m[(b, b)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = idx.iter().map(|&i| m[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
        Self { values, vectors }
    }

    pub fn max_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    /// `V diag(f(λ)) Vᵀ`
    pub fn reconstruct(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let d: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| acc + self.vectors[(i, k)] * d[k] * self.vectors[(j, k)])
        })
    }

    /// Coordinates of `x` in the eigenbasis, `Vᵀ x`.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        self.vectors.tmatvec(x)
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    assert!(a.is_square() && b.len() == n, "solve shape");
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap()).unwrap();
        if m[(piv, col)].abs() <= T::epsilon() * scale * T::c(n as f64) || !m[(piv, col)].is_finite() {
            return Err(Error::NumericalBreakdown("singular linear system".into()));
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            x.swap(col, piv);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                m[(r, k)] = m[(r, k)] - f * m[(col, k)];
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc = acc - m[(col, k)] * x[k];
        }
        x[col] = acc / m[(col, col)];
    }
    Ok(x)
}

/// Determinant via LU with partial pivoting.
pub fn determinant<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut m = a.clone();
    let mut det = T::one();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap()).unwrap();
        if m[(piv, col)] == T::zero() {
            return T::zero();
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            det = -det;
        }
        let d = m[(col, col)];
        det = det * d;
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            for k in col..n {
                m[(r, k)] = m[(r, k)] - f * m[(col, k)];
            }
        }
    }
    det
}
