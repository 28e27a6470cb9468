//! Dense vectors and matrices small enough to keep on the stack of a solver
//! iteration. Nothing here tries to compete with a BLAS; problem sizes in
//! this crate are tens of coordinates.

use std::ops::{Deref, DerefMut, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point of `R^n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar")]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    /// Wraps `entries`, rejecting NaN and infinities.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::NonFinite("vector"))
        }
    }

    /// Wraps `entries` without the finiteness check.
    pub fn from_vec_unchecked(entries: Vec<T>) -> Self {
        Self(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self(vec![value; n])
    }

    pub fn from_f64s(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for Vector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> FromIterator<T> for Vector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    dist_sq(a, b).sqrt()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vector<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `a + s * b`
pub fn axpy<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vector<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Row-major dense square-or-rectangular matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vector<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.mul_vec(x))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `Some(diagonal)` when every off-diagonal entry is exactly zero.
    pub fn as_diagonal(&self) -> Option<Vec<T>> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.get(i, j) != T::zero() {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.get(i, i)).collect())
    }

    /// Largest absolute row sum. Bounds the spectral radius from above
    /// (Gershgorin), which is what the gradient-step rules need.
    pub fn max_abs_row_sum(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Cholesky test of `M + shift·I`. Succeeds exactly when the smallest
    /// eigenvalue of the symmetric matrix `M` exceeds `-shift`.
    pub fn is_positive_definite_shifted(&self, shift: T) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.get(j, j) + shift;
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

impl<T: Scalar> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        assert!(Vector::<f64>::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::<f64>::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(Vector::<f64>::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn basic_ops() {
        let a = [3.0, 4.0];
        assert_eq!(norm(&a), 5.0);
        assert_eq!(dist(&a, &[0.0, 0.0]), 5.0);
        assert_eq!(&*axpy(&a, 2.0, &[1.0, 1.0]), &[5.0, 6.0]);
    }

    #[test]
    fn psd_shift_test() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(m.is_positive_definite_shifted(0.0));
        // eigenvalues 1 and -1
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!m.is_positive_definite_shifted(1e-8));
        assert!(m.is_positive_definite_shifted(1.0 + 1e-8));
        // singular psd
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(m.is_positive_definite_shifted(1e-8));
    }

    #[test]
    fn diagonal_detection() {
        let m = Matrix::diagonal(&[1.0, 2.0]);
        assert_eq!(m.as_diagonal(), Some(vec![1.0, 2.0]));
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(m.as_diagonal(), None);
    }
}
