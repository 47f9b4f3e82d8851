//! Dense linear algebra for the small dimensions met in reduced mechanics.
//!
//! Everything here is sized at run time but expected to stay below a dozen
//! rows and columns: Lie algebra coordinates, constraint bases and the
//! Newton systems of the steppers. Elimination uses partial pivoting and
//! subspace bases are always returned orthonormal, so that residuals computed
//! from them do not depend on which spanning set produced the subspace.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular at rank tolerance")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("columns are linearly dependent: rank {rank} < {expected}")]
    RankDeficient { expected: usize, rank: usize },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
}

/// Coordinate vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Real> Vector<T> {
    pub fn new(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![T::zero(); n] }
    }

    /// The `i`-th standard basis vector of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[i] = T::one();
        v
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> T) -> Self {
        Self { data: (0..n).map(f).collect() }
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        Self { data: xs.iter().map(|&x| T::lit(x)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self { data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Concatenation `(self, tail)`.
    pub fn concat(&self, tail: &Self) -> Self {
        let mut data = self.data.clone();
        data.extend_from_slice(&tail.data);
        Self { data }
    }

    /// Splits into the first `k` entries and the rest.
    pub fn split(&self, k: usize) -> (Self, Self) {
        (Self::new(self.data[..k].to_vec()), Self::new(self.data[k..].to_vec()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Vector<U> {
        Vector { data: self.data.iter().map(|x| U::lit(x.to_f64_lossy())).collect() }
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(data: Vec<T>) -> Self {
        Self { data }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl<T: Real> Add for &Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        Vector { data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        Vector { data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: Real> Add for Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: Vector<T>) -> Vector<T> {
        &self + &rhs
    }
}

impl<T: Real> Sub for Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: Vector<T>) -> Vector<T> {
        &self - &rhs
    }
}

impl<T: Real> AddAssign<&Vector<T>> for Vector<T> {
    fn add_assign(&mut self, rhs: &Vector<T>) {
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl<T: Real> SubAssign<&Vector<T>> for Vector<T> {
    fn sub_assign(&mut self, rhs: &Vector<T>) {
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl<T: Real> Neg for &Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        self.map(|x| -x)
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        -&self
    }
}

impl<T: Real> Mul<T> for &Vector<T> {
    type Output = Vector<T>;
    fn mul(self, s: T) -> Vector<T> {
        self.scale(s)
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Vector<T>;
    fn mul(self, s: T) -> Vector<T> {
        self.scale(s)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { T::zero() })
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

    /// Builds a matrix from `f64` rows; panics on ragged input.
    pub fn from_rows_f64(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| T::lit(rows[i][j]))
    }

    /// Matrix whose columns are `cols`, each of length `rows`.
    pub fn from_columns(rows: usize, cols: &[Vector<T>]) -> Self {
        assert!(cols.iter().all(|c| c.len() == rows), "column length mismatch");
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i])
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

    pub fn column(&self, j: usize) -> Vector<T> {
        Vector::from_fn(self.rows, |i| self[(i, j)])
    }

    pub fn row(&self, i: usize) -> Vector<T> {
        Vector::new(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn columns(&self) -> Vec<Vector<T>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &Vector<T>) {
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        Vector::from_fn(self.rows, |i| {
            self.data[i * self.cols..(i + 1) * self.cols]
                .iter()
                .zip(v.iter())
                .map(|(&a, &b)| a * b)
                .sum()
        })
    }

    /// `selfᵀ v` without forming the transpose.
    pub fn tr_mul_vec(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(self.rows, v.len(), "matrix-vector dimension mismatch");
        let mut out = Vector::zeros(self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self[(i, j)] * v[i];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(-T::one()))
    }

    pub fn norm_max(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn max_column_norm(&self) -> T {
        (0..self.cols).map(|j| self.column(j).norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn determinant(&self) -> T {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[(x, k)].abs().partial_cmp(&a[(y, k)].abs()).unwrap()).unwrap();
            if a[(p, k)] == T::zero() {
                return T::zero();
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            det *= a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Pivots at or below `rank_tol · max_column_norm(A)` report
/// [`LinalgError::SingularMatrix`].
pub fn solve_linear<T: Real>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vector::zeros(0));
    }
    let scale = a.max_column_norm();
    if scale == T::zero() {
        return Err(LinalgError::SingularMatrix);
    }
    let tol = T::rank_tol() * scale;
    let mut m = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[(i, k)].abs() > m[(p, k)].abs() {
                p = i;
            }
        }
        if m[(p, k)].abs() <= tol {
            return Err(LinalgError::SingularMatrix);
        }
        if p != k {
            m.swap_rows(p, k);
            let t = x[p];
            x[p] = x[k];
            x[k] = t;
        }
        let piv = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / piv;
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let v = m[(k, j)];
                m[(i, j)] -= f * v;
            }
            let v = x[k];
            x[i] -= f * v;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

/// Lower-triangular `L` with `A = L Lᵀ`; rejects non-symmetric or indefinite `A`.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    let scale = a.norm_max();
    if a.sub(&a.transpose()).norm_max() > T::rank_tol() * scale {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::rank_tol() * scale) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Least-squares coefficients `c` minimising `|G c − v|` for full column rank `G`.
pub fn least_squares<T: Real>(g: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>, LinalgError> {
    let gt = g.transpose();
    solve_linear(&gt.matmul(g), &g.tr_mul_vec(v))
}

/// Reduced row echelon form; returns the reduced matrix and its pivot columns.
fn rref<T: Real>(a: &Matrix<T>, tol: T) -> (Matrix<T>, Vec<usize>) {
    let mut m = a.clone();
    let scale = a.max_column_norm();
    let mut pivots = Vec::new();
    if scale == T::zero() {
        return (m, pivots);
    }
    let thresh = tol * scale;
    let mut r = 0;
    for c in 0..m.cols() {
        if r == m.rows() {
            break;
        }
        let mut p = r;
        for i in r + 1..m.rows() {
            if m[(i, c)].abs() > m[(p, c)].abs() {
                p = i;
            }
        }
        if m[(p, c)].abs() <= thresh {
            for i in r..m.rows() {
                m[(i, c)] = T::zero();
            }
            continue;
        }
        m.swap_rows(p, r);
        let piv = m[(r, c)];
        for j in 0..m.cols() {
            m[(r, j)] /= piv;
        }
        for i in 0..m.rows() {
            if i == r {
                continue;
            }
            let f = m[(i, c)];
            if f == T::zero() {
                continue;
            }
            for j in 0..m.cols() {
                let v = m[(r, j)];
                m[(i, j)] -= f * v;
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

/// Numerical rank at relative tolerance `tol`.
pub fn rank<T: Real>(a: &Matrix<T>, tol: T) -> usize {
    rref(a, tol).1.len()
}

/// Orthonormal basis of a linear subspace of `R^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis<T> {
    ambient_dim: usize,
    columns: Vec<Vector<T>>,
}

/// Result of a subspace membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Containment<T> {
    pub contained: bool,
    pub residual: T,
}

impl<T: Real> SubspaceBasis<T> {
    /// The zero subspace.
    pub fn zero(ambient_dim: usize) -> Self {
        Self { ambient_dim, columns: Vec::new() }
    }

    /// The whole ambient space, spanned by the standard basis.
    pub fn full(ambient_dim: usize) -> Self {
        Self { ambient_dim, columns: (0..ambient_dim).map(|i| Vector::unit(ambient_dim, i)).collect() }
    }

    /// Orthonormalizes `cols` in order (modified Gram–Schmidt, two passes).
    ///
    /// Fails when a column is dependent on its predecessors at relative
    /// tolerance `tol`. Processing order is fixed, so the result is a smooth
    /// function of smoothly varying independent input columns.
    pub fn orthonormalize(ambient_dim: usize, cols: &[Vector<T>], tol: T) -> Result<Self, LinalgError> {
        let mut out: Vec<Vector<T>> = Vec::with_capacity(cols.len());
        for (k, c) in cols.iter().enumerate() {
            if c.len() != ambient_dim {
                return Err(LinalgError::DimensionMismatch { expected: ambient_dim, found: c.len() });
            }
            if !c.is_finite() {
                return Err(LinalgError::NonFinite);
            }
            let n0 = c.norm();
            let mut v = c.clone();
            for _ in 0..2 {
                for q in &out {
                    let p = q.dot(&v);
                    v -= &q.scale(p);
                }
            }
            let n1 = v.norm();
            if n0 == T::zero() || n1 <= tol * n0 {
                return Err(LinalgError::RankDeficient { expected: cols.len(), rank: k });
            }
            out.push(v.scale(T::one() / n1));
        }
        Ok(Self { ambient_dim, columns: out })
    }

    /// Orthonormal basis of `span(cols)`, silently dropping dependent columns.
    pub fn span(ambient_dim: usize, cols: &[Vector<T>], tol: T) -> Self {
        let mut out: Vec<Vector<T>> = Vec::new();
        let scale = cols.iter().map(|c| c.norm()).fold(T::zero(), T::max);
        for c in cols {
            assert_eq!(c.len(), ambient_dim, "column length mismatch");
            let mut v = c.clone();
            for _ in 0..2 {
                for q in &out {
                    let p = q.dot(&v);
                    v -= &q.scale(p);
                }
            }
            let n1 = v.norm();
            if n1 > tol * scale && n1 > T::zero() {
                out.push(v.scale(T::one() / n1));
            }
        }
        Self { ambient_dim, columns: out }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vector<T>] {
        &self.columns
    }

    /// Columns as an `ambient_dim × dim` matrix.
    pub fn to_matrix(&self) -> Matrix<T> {
        Matrix::from_columns(self.ambient_dim, &self.columns)
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &Vector<T>) -> Vector<T> {
        let mut p = Vector::zeros(self.ambient_dim);
        for q in &self.columns {
            p += &q.scale(q.dot(v));
        }
        p
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn distance(&self, v: &Vector<T>) -> T {
        (v - &self.project(v)).norm()
    }
}

/// Orthonormal basis of `{x : A x = 0}`; its dimension is `cols(A) − rank(A)`.
pub fn nullspace_basis<T: Real>(a: &Matrix<T>, tol: T) -> SubspaceBasis<T> {
    let n = a.cols();
    let (r, pivots) = rref(a, tol);
    let mut raw = Vec::new();
    for f in (0..n).filter(|c| !pivots.contains(c)) {
        let mut x = Vector::zeros(n);
        x[f] = T::one();
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = -r[(row, f)];
        }
        raw.push(x);
    }
    // Free-variable vectors are independent by construction (unit entry in a distinct free slot).
    SubspaceBasis::orthonormalize(n, &raw, T::epsilon())
        .unwrap_or_else(|_| SubspaceBasis::span(n, &raw, T::epsilon()))
}

/// Annihilator `{μ : μ·v = 0 ∀ v ∈ span(B)}` under the dot pairing.
pub fn annihilator_basis<T: Real>(b: &SubspaceBasis<T>) -> SubspaceBasis<T> {
    if b.dim() == 0 {
        return SubspaceBasis::full(b.ambient_dim());
    }
    nullspace_basis(&b.to_matrix().transpose(), T::rank_tol())
}

/// Tests `v ∈ span(B)`: residual `|v − P_B v|`, accepted iff `residual ≤ tol (1 + |v|)`.
pub fn subspace_contains<T: Real>(b: &SubspaceBasis<T>, v: &Vector<T>, tol: T) -> Containment<T> {
    assert_eq!(b.ambient_dim(), v.len(), "dimension mismatch");
    let residual = b.distance(v);
    Containment { contained: residual <= tol * (T::one() + v.norm()), residual }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square());
    let n = a.rows();
    let norm = a.norm_max() * T::lit(n as f64);
    let mut squarings = 0u32;
    let mut s = T::one();
    while norm * s > T::lit(0.5) {
        s /= T::lit(2.0);
        squarings += 1;
    }
    let scaled = a.scale(s);
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=20 {
        term = term.matmul(&scaled).scale(T::one() / T::lit(k as f64));
        sum = sum.add(&term);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}
