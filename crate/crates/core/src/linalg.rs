//! Small dense linear algebra over `f64` and `Complex64`.
//!
//! Matrices are column-major. Everything the estimators need lives here:
//! products, Hermitian adjoints, Cholesky factorization with a
//! condition estimate, triangular solves and a cyclic Jacobi
//! eigensolver for Hermitian matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::LinalgError;

/// Field element usable in [`Matrix`].
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Zero
{
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    /// Squared modulus.
    fn abs2(self) -> f64;
    fn scale(self, k: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, k: f64) -> Self {
        Complex64::new(self.re * k, self.im * k)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Dense column-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type CMatrix = Matrix<Complex64>;
pub type RMatrix = Matrix<f64>;

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from column-major storage.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "storage length mismatch");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from a list of equally long columns.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend_from_slice(c);
        }
        Matrix {
            rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.rows.min(self.cols) {
            t += self[(i, i)];
        }
        t
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.scale(k)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in oc.iter().enumerate() {
                if b == T::zero() {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, &a) in dst.iter_mut().zip(ac) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᴴ * other` without forming the adjoint.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let b = other.col(j);
            for i in 0..self.cols {
                out[(i, j)] = dot_conj(self.col(i), b);
            }
        }
        out
    }

    /// `self * otherᴴ`.
    pub fn matmul_adjoint(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_adjoint dimension mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        for k in 0..self.cols {
            let a = self.col(k);
            let b = other.col(k);
            for (j, &bj) in b.iter().enumerate() {
                let bj = bj.conj();
                if bj == T::zero() {
                    continue;
                }
                let dst = out.col_mut(j);
                for (d, &ai) in dst.iter_mut().zip(a) {
                    *d += ai * bj;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        let mut y = vec![T::zero(); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `selfᴴ x`.
    pub fn adjoint_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "adjoint_matvec dimension mismatch");
        (0..self.cols).map(|j| dot_conj(self.col(j), x)).collect()
    }

    pub fn add_diag(&mut self, d: &[T]) {
        for (i, &v) in d.iter().enumerate() {
            self[(i, i)] += v;
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs2().sqrt()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs2().sqrt()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `max |A - Aᴴ|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.cols {
            for i in 0..self.rows {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).abs2().sqrt());
            }
        }
        worst
    }

    /// Replaces `A` by `(A + Aᴴ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for j in 0..n {
            for i in 0..j {
                let v = (self[(i, j)] + self[(j, i)].conj()).scale(0.5);
                self[(i, j)] = v;
                self[(j, i)] = v.conj();
            }
            let d = self[(j, j)].re();
            self[(j, j)] = T::from_real(d);
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

/// `aᴴ b`.
#[inline]
pub fn dot_conj<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x.conj() * y;
    }
    s
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T: Scalar> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a Hermitian positive definite matrix, reading only the
    /// lower triangle.
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut l = Matrix::<T>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re();
            for k in 0..j {
                d -= l[(j, k)].abs2();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = T::from_real(djj);
            let inv = 1.0 / djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s.scale(inv);
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Cheap condition estimate `(max Lᵢᵢ / min Lᵢᵢ)²`.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.l.diag();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in d {
            let v = v.re();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let r = hi / lo;
        r * r
    }

    /// Solves `L x = b` in place.
    pub fn forward_substitute(&self, b: &mut [T]) {
        let n = self.dim();
        for j in 0..n {
            let v = b[j].scale(1.0 / self.l[(j, j)].re());
            b[j] = v;
            if v == T::zero() {
                continue;
            }
            let col = self.l.col(j);
            for i in j + 1..n {
                b[i] -= col[i] * v;
            }
        }
    }

    /// Solves `Lᴴ x = b` in place.
    pub fn backward_substitute(&self, b: &mut [T]) {
        let n = self.dim();
        for j in (0..n).rev() {
            let col = self.l.col(j);
            let mut s = b[j];
            for i in j + 1..n {
                s -= col[i].conj() * b[i];
            }
            b[j] = s.scale(1.0 / self.l[(j, j)].re());
        }
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.forward_substitute(&mut x);
        self.backward_substitute(&mut x);
        x
    }

    /// Solves `L X = B` column by column.
    pub fn forward_substitute_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut x = b.clone();
        for j in 0..x.cols() {
            self.forward_substitute(x.col_mut(j));
        }
        x
    }

    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut x = b.clone();
        for j in 0..x.cols() {
            let c = x.col_mut(j);
            self.forward_substitute(c);
            self.backward_substitute(c);
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let mut inv = self.solve_matrix(&Matrix::identity(self.dim()));
        inv.symmetrize();
        inv
    }
}

/// Outcome of a Hermitian positive semidefinite solve under the ridge
/// policy.
#[derive(Clone, Debug)]
pub struct RegularizedSolution<T> {
    pub x: Vec<T>,
    /// Ridge added to the diagonal, zero when none was needed.
    pub ridge: f64,
    /// `‖(A + ridge·I) x − b‖ / ‖b‖` of the system actually solved.
    pub relative_residual: f64,
}

/// Condition-estimate ceiling above which the ridge is applied.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Ridge scale relative to `Tr{A}/n`.
pub const RIDGE_SCALE: f64 = 1e-10;

/// Solves `A x = b` for Hermitian PSD `A`.
///
/// A ridge of `1e-10·Tr{A}/n` is added only when the Cholesky
/// factorization fails or its condition estimate exceeds `1e14`.
pub fn solve_psd_with_ridge<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<RegularizedSolution<T>, LinalgError> {
    let n = a.rows();
    let mut ridge = 0.0;
    let chol = match Cholesky::new(a) {
        Ok(c) if c.condition_estimate() <= CONDITION_LIMIT => c,
        _ => {
            let tr = a.trace().re();
            ridge = RIDGE_SCALE * tr.abs() / n.max(1) as f64;
            if !(ridge > 0.0) {
                ridge = f64::MIN_POSITIVE.sqrt();
            }
            let mut reg = a.clone();
            reg.add_diag(&vec![T::from_real(ridge); n]);
            Cholesky::new(&reg)?
        }
    };
    let x = chol.solve_vec(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut r = a.matvec(&x);
    for ((ri, &bi), &xi) in r.iter_mut().zip(b).zip(&x) {
        *ri += xi.scale(ridge);
        *ri -= bi;
    }
    let bn = norm2(b);
    let relative_residual = if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) };
    Ok(RegularizedSolution {
        x,
        ridge,
        relative_residual,
    })
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unit eigenvectors as columns, ordered like `values`.
    pub vectors: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for q in 1..n {
            for p in 0..q {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // Phase-align the pivot, then apply a real Jacobi rotation.
                let phase = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotation G acting on columns p, q:
                //   G[p,p] = c,          G[p,q] = s
                //   G[q,p] = -s·e^{-jφ}, G[q,q] = c·e^{-jφ}
                let pc = phase.conj();
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -pc * s;
                let gqq = pc * c;
                // M <- M G
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * gpp + miq * gqp;
                    m[(i, q)] = mip * gpq + miq * gqq;
                }
                // M <- Gᴴ M
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = gpp.conj() * mpj + gqp.conj() * mqj;
                    m[(q, j)] = gpq.conj() * mpj + gqq.conj() * mqj;
                }
                m[(p, q)] = Complex64::zero();
                m[(q, p)] = Complex64::zero();
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * gpp + viq * gqp;
                    v[(i, q)] = vip * gpq + viq * gqq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}
