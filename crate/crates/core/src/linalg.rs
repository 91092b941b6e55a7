//! Small dense complex matrices.
//!
//! Every matrix in this crate is tiny (2x2, 3x3 or 9x9), so storage is plain
//! row-major `Vec` and all algorithms are the straightforward O(n^3) ones.
//! The Hermitian eigensolver is a cyclic complex Jacobi iteration; it is used
//! for positive-semidefiniteness checks on density matrices.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{base_tol, RealScalar, C};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: RealScalar> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::c_zero(); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = T::c_one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C<T>>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if r == 0 || c == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<C<T>> = rows.into_iter().flatten().collect();
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite matrix entry".into()));
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Outer product `u v^dagger`.
    pub fn outer(u: &[C<T>], v: &[C<T>]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
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

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::c_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix add shapes differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(C::new(s, T::zero()))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C<T> {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).fold(T::c_zero(), |a, b| a + b)
    }

    /// Kronecker product, `self` slow index.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == T::c_zero() {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Result<Vec<C<T>>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![T::c_zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::c_zero();
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `U * m * U^dagger`.
    pub fn sandwich(&self, m: &Self) -> Result<Self> {
        self.mul(m)?.mul(&self.adjoint())
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix diff shapes differ".into()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a }))
    }

    /// Largest deviation from the identity, `max |m - I|`.
    pub fn identity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { T::c_one() } else { T::c_zero() };
                let d = (self[(i, j)] - target).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Largest deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        match self.adjoint().mul(self) {
            Ok(m) => m.identity_defect() < tol,
            Err(_) => false,
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Real parts, row major.
    pub fn re_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].re).collect())
            .collect()
    }

    /// Imaginary parts, row major.
    pub fn im_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].im).collect())
            .collect()
    }

    pub fn from_re_im(re: &[Vec<T>], im: &[Vec<T>]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch("re/im row counts differ".into()));
        }
        let rows: Result<Vec<Vec<C<T>>>> = re
            .iter()
            .zip(im)
            .map(|(r, i)| {
                if r.len() != i.len() {
                    return Err(Error::DimensionMismatch("re/im col counts differ".into()));
                }
                Ok(r.iter().zip(i).map(|(&a, &b)| C::new(a, b)).collect())
            })
            .collect();
        Self::from_rows(rows?)
    }
}

impl<T: RealScalar> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: RealScalar> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Serialized form: `{"re": [[...]], "im": [[...]]}`.
#[derive(Serialize, Deserialize)]
struct MatrixRepr<T> {
    re: Vec<Vec<T>>,
    im: Vec<Vec<T>>,
}

impl<T: RealScalar> Serialize for ComplexMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            re: self.re_rows(),
            im: self.im_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: RealScalar> Deserialize<'de> for ComplexMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::<T>::deserialize(deserializer)?;
        ComplexMatrix::from_re_im(&repr.re, &repr.im).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub struct HermitianEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix<T>,
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Off-diagonal elements are annihilated pairwise with 2x2 unitary rotations
/// until the off-diagonal Frobenius mass falls below `base_tol` relative to
/// the matrix scale.
pub fn hermitian_eigen<T: RealScalar>(m: &ComplexMatrix<T>) -> Result<HermitianEigen<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigensolver needs a square matrix".into()));
    }
    let tol = base_tol::<T>();
    if m.hermitian_defect() > tol * T::from_f(10.0) {
        return Err(Error::InvalidState("eigensolver input is not Hermitian".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = ComplexMatrix::<T>::identity(n);
    let scale = {
        let f = a.frobenius_norm();
        if f > T::one() {
            f
        } else {
            T::one()
        }
    };
    let stop = tol * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= stop * T::from_f(1e-3) {
                    continue;
                }
                let u = apq / C::new(r, T::zero());
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (r + r);
                let t = if tau == T::zero() {
                    T::one()
                } else {
                    tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let su = C::new(s, T::zero()) * u;
                let cc = C::new(c, T::zero());

                // column update: A <- A * J with J[p][p]=J[q][q]=c,
                // J[p][q] = s*u, J[q][p] = -s*conj(u)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cc * akp - su.conj() * akq;
                    a[(k, q)] = su * akp + cc * akq;
                }
                // row update: A <- J^dagger * A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cc * apk - su * aqk;
                    a[(q, k)] = su.conj() * apk + cc * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cc * vkp - su.conj() * vkq;
                    v[(k, q)] = su * vkp + cc * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues<T: RealScalar>(m: &ComplexMatrix<T>) -> Result<Vec<T>> {
    hermitian_eigen(m).map(|e| e.values)
}
