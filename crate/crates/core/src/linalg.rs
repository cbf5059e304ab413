//! Small dense linear algebra: planar vectors, 2×2 closed forms and a
//! row-major dynamic matrix for the assembled information matrices.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Condition-number ceiling applied to every closed-form inversion.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T> From<[T; 2]> for Vec2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl<T> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn scale(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn outer(self, other: Self) -> Mat2<T> {
        Mat2::new(self.x * other.x, self.x * other.y, self.y * other.x, self.y * other.y)
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Vec2<U> {
        Vec2::new(U::from(self.x).expect("castable"), U::from(self.y).expect("castable"))
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        Mat2::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Mat2::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn diag(a: T, d: T) -> Self {
        Mat2::new(a, T::zero(), T::zero(), d)
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn scale(&self, s: T) -> Self {
        Mat2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    /// Averages the off-diagonal pair.
    pub fn symmetrized(&self) -> Self {
        let off = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        Mat2::new(self.m[0][0], off, off, self.m[1][1])
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> (T, T) {
        let s = self.symmetrized();
        let half_tr = s.trace() * T::lit(0.5);
        let half_gap = (s.m[0][0] - s.m[1][1]) * T::lit(0.5);
        let radius = half_gap.hypot(s.m[0][1]);
        (half_tr - radius, half_tr + radius)
    }

    /// Spectral condition number of the symmetric part (infinite when singular).
    pub fn sym_condition(&self) -> T {
        let (lo, hi) = self.sym_eigenvalues();
        let (lo, hi) = (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()));
        if lo == T::zero() {
            T::infinity()
        } else {
            hi / lo
        }
    }

    /// Adjugate inverse of a symmetric matrix guarded by [`CONDITION_LIMIT`].
    pub fn inverse_guarded(&self) -> Result<Self> {
        let condition = self.sym_condition();
        let limit = T::lit(CONDITION_LIMIT);
        if !(condition <= limit) {
            return Err(Error::SingularGeometry {
                condition: condition.to_f64().unwrap_or(f64::INFINITY),
                limit: CONDITION_LIMIT,
            });
        }
        Ok(self.adjugate_inverse())
    }

    /// Unguarded adjugate inverse.
    pub fn adjugate_inverse(&self) -> Self {
        let det = self.det();
        Mat2::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0]).scale(det.recip())
    }

    pub fn frobenius(&self) -> T {
        let mut acc = T::zero();
        for row in &self.m {
            for &v in row {
                acc = acc + v * v;
            }
        }
        acc.sqrt()
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-T::one())
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
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

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix product inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
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
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn block2(&self, r0: usize, c0: usize) -> Mat2<T> {
        Mat2::new(
            self[(r0, c0)],
            self[(r0, c0 + 1)],
            self[(r0 + 1, c0)],
            self[(r0 + 1, c0 + 1)],
        )
    }

    pub fn set_block2(&mut self, r0: usize, c0: usize, b: &Mat2<T>) {
        for i in 0..2 {
            for j in 0..2 {
                self[(r0 + i, c0 + j)] = b.m[i][j];
            }
        }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    /// Largest |a_ij - a_ji| relative to the Frobenius norm.
    pub fn asymmetry(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let scale = self.frobenius();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Frobenius distance to `reference`, divided by the reference norm.
    pub fn relative_frobenius_error(&self, reference: &Self) -> T {
        self.sub(reference).frobenius() / reference.frobenius()
    }

    /// Relative Frobenius error after the symmetric diagonal scaling
    /// `D^{-1/2} (A - B) D^{-1/2}` with `D = diag(reference)`, so blocks of
    /// very different physical units weigh equally.
    pub fn scaled_relative_error(&self, reference: &Self) -> T {
        assert_eq!(self.rows, self.cols);
        let d: Vec<T> = (0..self.rows).map(|i| reference[(i, i)].abs().sqrt()).collect();
        let scaled = |m: &Self| {
            Self::from_fn(self.rows, self.cols, |i, j| {
                if d[i] == T::zero() || d[j] == T::zero() {
                    m[(i, j)]
                } else {
                    m[(i, j)] / (d[i] * d[j])
                }
            })
        };
        scaled(self).relative_frobenius_error(&scaled(reference))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
