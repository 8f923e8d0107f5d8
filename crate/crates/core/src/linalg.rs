//! Dense real matrices and the handful of decompositions the solvers need.
//!
//! [`Matrix`] is a plain row-major buffer. The SVD is delegated to
//! `nalgebra` and post-processed into a deterministic, sorted, sign-fixed
//! thin factorization.

use std::fmt;

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// Iteration cap handed to the bidiagonal QR sweep, per unit of `min(m, n)`.
const SVD_ITERS_PER_DIM: usize = 200;

/// A dense `rows x cols` matrix of finite `f64`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Creates a zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps a row-major buffer, validating its length and finiteness.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    /// Builds `diag(values)` padded to `rows x cols`.
    pub fn diagonal(rows: usize, cols: usize, values: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &v) in values.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = v;
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two equally shaped matrices.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    /// `||self - other||_F` without allocating.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "distance shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, " ")?;
            for c in 0..self.cols {
                write!(f, " {:>10.4}", self.get(r, c))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Thin SVD `M = U diag(s) V^T` with `k = min(m, n)` components.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `m x k`, orthonormal columns.
    pub u: Matrix,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    /// Rebuilds `U diag(sigma) V^T` for a replacement spectrum `sigma`.
    ///
    /// Components with `sigma[i] == 0` are skipped.
    pub fn reconstruct_with(&self, sigma: &[f64]) -> Matrix {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        assert_eq!(sigma.len(), k, "spectrum length must equal k");
        let mut out = Matrix::zeros(m, n);
        for (i, &si) in sigma.iter().enumerate() {
            if si == 0.0 {
                continue;
            }
            for r in 0..m {
                let ur = self.u.get(r, i) * si;
                if ur == 0.0 {
                    continue;
                }
                let row = &mut out.data[r * n..(r + 1) * n];
                for (c, o) in row.iter_mut().enumerate() {
                    *o += ur * self.v.data[c * k + i];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.s)
    }
}

fn validate_finite(m: &Matrix) -> Result<()> {
    match m.data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Thin singular value decomposition.
///
/// Singular values are sorted in nonincreasing order. Each column of `U` is
/// signed so that its largest-magnitude entry (first one on ties) is
/// nonnegative, and the matching column of `V` is flipped with it, so the
/// result is a deterministic function of the input.
pub fn svd(m: &Matrix) -> Result<Svd> {
    validate_finite(m)?;
    let k = m.rows.min(m.cols);
    let max_iter = SVD_ITERS_PER_DIM * k.max(1);
    let dec = SVD::try_new(m.to_nalgebra(), true, true, f64::EPSILON, max_iter).ok_or(
        Error::SvdNotConverged {
            iterations: max_iter,
        },
    )?;
    let (Some(u), Some(v_t)) = (dec.u, dec.v_t) else {
        unreachable!("both singular vector sets were requested");
    };
    let mut u = Matrix::from_nalgebra(&u);
    let mut v = Matrix::from_nalgebra(&v_t.transpose());
    let mut s: Vec<f64> = dec.singular_values.iter().copied().collect();

    // nalgebra sorts already; enforce it so callers can rely on the order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let (u0, v0, s0) = (u.clone(), v.clone(), s.clone());
        for (dst, &src) in order.iter().enumerate() {
            s[dst] = s0[src];
            for r in 0..u.rows {
                u.set(r, dst, u0.get(r, src));
            }
            for r in 0..v.rows {
                v.set(r, dst, v0.get(r, src));
            }
        }
    }

    for j in 0..k {
        let mut pivot = 0.0_f64;
        for r in 0..u.rows {
            let x = u.get(r, j);
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            for r in 0..u.rows {
                u.set(r, j, -u.get(r, j));
            }
            for r in 0..v.rows {
                v.set(r, j, -v.get(r, j));
            }
        }
    }
    for x in &mut s {
        *x = x.max(0.0);
    }
    Ok(Svd { u, s, v })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    validate_finite(m)?;
    let k = m.rows.min(m.cols);
    let max_iter = SVD_ITERS_PER_DIM * k.max(1);
    let dec = SVD::try_new(m.to_nalgebra(), false, false, f64::EPSILON, max_iter).ok_or(
        Error::SvdNotConverged {
            iterations: max_iter,
        },
    )?;
    let mut s: Vec<f64> = dec.singular_values.iter().map(|x| x.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest singular value; zero for the zero matrix.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.is_zero() {
        return Ok(0.0);
    }
    Ok(singular_values(m)?[0])
}

/// `sgn(x) * max(|x| - eps, 0)`.
#[inline]
pub fn soft_shrink(x: f64, eps: f64) -> f64 {
    debug_assert!(eps >= 0.0);
    let mag = x.abs() - eps;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}
