//! Dense symmetric matrices and Cholesky solves.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![T::one(); dim])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn from_rows(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |s, i| s + self.get(i, i))
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.dim {
            let d = self.get(i, i);
            self.set(i, i, d + v);
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::new(self)
    }
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.dim;
        let mut lower = vec![T::zero(); n * n];
        for i in 0..n {
            let (above, rest) = lower.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &above[j * n..j * n + j];
                row_i[j] = (a.get(i, j) - dot(&row_i[..j], row_j)) / above[j * n + j];
            }
            let d = a.get(i, i) - dot(&row_i[..i], &row_i[..i]);
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SingularCovariance { pivot: i });
            }
            row_i[i] = d.sqrt();
        }
        Ok(Self { dim: n, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            y[i] = (b[i] - dot(row, &y[..i])) / self.lower[i * n + i];
        }
        let mut x = y;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        Ok(x)
    }
}
