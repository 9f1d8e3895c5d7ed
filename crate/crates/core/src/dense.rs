//! Dense square matrices used by the exact oracles and small-scale estimators.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default upper bound on `n` for anything that materialises an `n x n` matrix.
pub const DEFAULT_ORACLE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Builds from row-major data. Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n, "row-major data has wrong length");
        Self(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(DMatrix::from_fn(n, n, f))
    }

    pub fn from_nalgebra(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "DenseMatrix must be square");
        Self(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n(), other.n());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        Self(&self.0 * &other.0)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n());
        let out = &self.0 * DVector::from_column_slice(v);
        out.iter().copied().collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        Self(&self.0 - &other.0)
    }

    /// Eigenvalues of a symmetric matrix in ascending order.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigen);
        }
        let eig = SymmetricEigen::new(self.0.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        Ok(vals)
    }

    /// Solves `self * X = rhs` for symmetric positive definite `self`.
    pub fn spd_solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let chol = self.0.clone().cholesky().ok_or(Error::Singular)?;
        Ok(Self(chol.solve(&rhs.0)))
    }

    /// Explicit inverse of a symmetric positive definite matrix (test comparisons only).
    pub fn spd_inverse(&self) -> Result<DenseMatrix> {
        let chol = self.0.clone().cholesky().ok_or(Error::Singular)?;
        Ok(Self(chol.inverse()))
    }

    /// Row-major CSV, full `f64` round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            for j in 0..self.n() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:?}", self[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<DenseMatrix> {
        let mut data = Vec::new();
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            rows += 1;
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("not a number: {field:?}"),
                })?;
                data.push(v);
            }
        }
        if data.len() != rows * rows {
            return Err(Error::DimensionMismatch {
                expected: rows * rows,
                got: data.len(),
            });
        }
        Ok(Self::from_row_major(rows, &data))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut f64 {
        &mut self.0[idx]
    }
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
///
/// Tracks `||A x_k||` for unit `x_k`, which converges to `|lambda|_max` even when
/// `lambda` and `-lambda` are both extremal (bipartite spectra). The start vector
/// is a fixed deterministic sequence so repeated calls agree bit-for-bit.
pub fn spectral_radius(m: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    let n = m.n();
    if n == 0 {
        return Ok(0.0);
    }
    let a = m.as_nalgebra();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    x /= x.norm();
    let mut prev = f64::NAN;
    for _ in 0..max_iters {
        let y = a * &x;
        let est = y.norm();
        if est == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= tol * est.max(1.0) {
            return Ok(est);
        }
        prev = est;
        x = y / est;
    }
    Err(Error::NoConvergence(max_iters))
}
