//! Dense real matrices and the few vector helpers the rest of the crate needs.
//!
//! Storage is row-major `Vec<f64>`. Dimensions stay small (state dims of a
//! few dozen), so everything is straightforward triple-loop arithmetic.

use alloc::vec;
use alloc::vec::Vec;

/// Dense linear operator between finite-dimensional coordinate spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOp {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LinOp {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinOp { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = LinOp::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Scalar multiple of the identity.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = LinOp::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = LinOp::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major data; panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        LinOp { rows, cols, data }
    }

    /// 1x1 matrix, convenient for scalar problems.
    pub fn scalar(v: f64) -> Self {
        LinOp { rows: 1, cols: 1, data: vec![v] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Overwrites the entries from a row-major slice of matching length.
    pub fn copy_from_slice(&mut self, src: &[f64]) {
        self.data.copy_from_slice(src);
    }

    pub fn transpose(&self) -> LinOp {
        let mut t = LinOp::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &LinOp) -> LinOp {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = LinOp::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let row = k * other.cols;
                let orow = i * other.cols;
                for j in 0..other.cols {
                    out.data[orow + j] += aik * other.data[row + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &LinOp) -> LinOp {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LinOp) -> LinOp {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &LinOp, f: impl Fn(f64, f64) -> f64) -> LinOp {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        LinOp { rows: self.rows, cols: self.cols, data }
    }

    pub fn scaled(&self, s: f64) -> LinOp {
        let data = self.data.iter().map(|&a| a * s).collect();
        LinOp { rows: self.rows, cols: self.cols, data }
    }

    pub fn neg(&self) -> LinOp {
        self.scaled(-1.0)
    }

    /// `self + s * other`, fused.
    pub fn add_scaled(&self, s: f64, other: &LinOp) -> LinOp {
        self.zip(other, |a, b| a + s * b)
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "apply dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = i * self.cols;
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.data[row + j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Transposed matrix-vector product `A' x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "apply_transpose dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = i * self.cols;
            for j in 0..self.cols {
                y[j] += self.data[row + j] * xi;
            }
        }
        y
    }

    pub fn frob_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|&a| a * a).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &a| m.max(libm::fabs(a)))
    }

    /// Largest |a_ij - a_ji| for a square matrix.
    pub fn max_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max(libm::fabs(self.data[i * n + j] - self.data[j * n + i]));
            }
        }
        worst
    }

    /// Symmetric part (F + F')/2 of a square matrix.
    pub fn symmetric_part(&self) -> LinOp {
        assert!(self.is_square());
        let n = self.rows;
        LinOp::from_fn(n, n, |i, j| 0.5 * (self.data[i * n + j] + self.data[j * n + i]))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Induced 1-norm (max column sum); cheap bound used by the exponential.
    pub fn one_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += libm::fabs(self.data[i * self.cols + j]);
            }
            best = best.max(s);
        }
        best
    }
}

/// Plain Euclidean dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// Inner product weighted by a uniform quadrature weight.
pub fn weighted_dot(weight: f64, x: &[f64], y: &[f64]) -> f64 {
    weight * dot(x, y)
}

/// Norm induced by the weighted inner product.
pub fn weighted_norm(weight: f64, x: &[f64]) -> f64 {
    libm::sqrt(weighted_dot(weight, x, x))
}
