//! Small dense linear algebra: row-major matrices, Cholesky factorisation,
//! and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Everything here targets the dimensions this crate actually works at
//! (routers and covariances with at most a few dozen rows), so the
//! implementations favour clarity and bit-for-bit reproducibility over
//! blocked performance.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math::sqrt;
use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Fails if the element count
    /// does not match the shape or any entry is non-finite.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid("matrix data length does not match shape"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix-vector product `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Column `j` copied out as a vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum())
    }

    /// Largest absolute deviation from symmetry, `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with a fixed left-to-right summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm of a vector.
#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Relative pivot floor for the Cholesky factorisation: pivots below
/// `CHOLESKY_PIVOT_RTOL * max_diagonal` mean the matrix is not positive
/// definite to working precision.
pub const CHOLESKY_PIVOT_RTOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L * L^T = a`.
///
/// Rejects non-square or asymmetric input, and rejects any pivot smaller
/// than [`CHOLESKY_PIVOT_RTOL`] times the largest diagonal entry rather
/// than silently producing a rank-deficient factor.
pub fn cholesky_lower(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    if a.asymmetry() > 1e-10 * (1.0 + a.frobenius_norm()) {
        return Err(Error::invalid("cholesky needs a symmetric matrix"));
    }
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(Error::numerical(
            "covariance has no positive diagonal entry",
        ));
    }
    let floor = CHOLESKY_PIVOT_RTOL * max_diag;

    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < floor {
            return Err(Error::numerical(
                "covariance is not positive definite to working precision",
            ));
        }
        let ljj = sqrt(pivot);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values` are sorted in descending order and `vectors` holds the matching
/// orthonormal eigenvectors as columns, so `a = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, aligned with `values`.
    pub vectors: Mat,
}

impl SymEigen {
    /// Eigenvector for `values[k]`, copied out.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k)
    }

    /// Frobenius norm of `V diag(values) V^T - a`, the reconstruction
    /// residual against the original matrix.
    pub fn reconstruction_error(&self, a: &Mat) -> f64 {
        let n = self.values.len();
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)];
                }
                let d = s - a[(i, j)];
                err += d * d;
            }
        }
        sqrt(err)
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition for a symmetric matrix.
///
/// Rotations are applied in a fixed row-by-row order until the
/// off-diagonal mass drops below `1e-15` times the Frobenius norm, which
/// for the small matrices used here happens in a handful of sweeps. The
/// fixed order keeps the result deterministic across runs.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    if a.asymmetry() > 1e-10 * (1.0 + a.frobenius_norm()) {
        return Err(Error::invalid(
            "eigendecomposition needs a symmetric matrix",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }

    let mut m = a.clone();
    // Work on the exact symmetric average so rotations preserve symmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Mat::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if sqrt(2.0 * off) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = 0.5 * (m[(q, q)] - m[(p, p)]) / apq;
                // Smaller-angle root of t^2 + 2 t theta - 1 = 0.
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
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
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::numerical("jacobi eigensolver did not converge"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(m[(src, src)]);
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}
