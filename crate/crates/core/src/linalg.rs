//! Dense column-major matrices, unit-norm design matrices with block
//! structure, and an incrementally grown thin QR factorization for the
//! least-squares fits and residuals every selector needs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut, Range};

use libm::sqrt;

use crate::{Error, Result};

/// Orthogonalized component norm below which a new column counts as
/// collinear with the current support. Columns are unit norm, so an absolute
/// tolerance is meaningful.
pub const RANK_TOL: f64 = 1e-10;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.frobenius_norm_sq())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `selfᵀ · other`.
    pub fn transpose_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "transpose_mul row mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for l in 0..other.cols {
            let rhs = other.col(l);
            for j in 0..self.cols {
                out.data[l * self.cols + j] = dot(self.col(j), rhs);
            }
        }
        out
    }

    /// `self · other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for l in 0..other.cols {
            let dst = &mut out.data[l * self.rows..(l + 1) * self.rows];
            for (k, &w) in other.col(l).iter().enumerate() {
                if w != 0.0 {
                    axpy(w, self.col(k), dst);
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rows whose entries are not all zero.
    pub fn nonzero_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| (0..self.cols).any(|j| self[(i, j)] != 0.0))
            .collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sensing matrix with unit-norm columns grouped into equal blocks.
///
/// Block `k` (zero-based) covers columns `k*l_b .. (k+1)*l_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: Matrix,
    block_len: usize,
    renormalization: f64,
}

impl DesignMatrix {
    /// Normalizes every column to unit Euclidean norm.
    ///
    /// Fails on a zero (or non-finite) column and when `block_len` does not
    /// divide the column count.
    pub fn new(mut matrix: Matrix, block_len: usize) -> Result<Self> {
        if block_len == 0 || matrix.cols() == 0 || !matrix.cols().is_multiple_of(block_len) {
            return Err(Error::Config(format!(
                "block length {block_len} does not divide column count {}",
                matrix.cols()
            )));
        }
        if matrix.rows() == 0 {
            return Err(Error::Config("design matrix has no rows".into()));
        }
        let mut renormalization: f64 = 0.0;
        for j in 0..matrix.cols() {
            let col = matrix.col_mut(j);
            let norm = sqrt(dot(col, col));
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::ZeroColumn { column: j });
            }
            renormalization = renormalization.max((norm - 1.0).abs());
            col.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self {
            matrix,
            block_len,
            renormalization,
        })
    }

    /// Largest `|‖x_j‖ - 1|` seen before normalization.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_blocks(&self) -> usize {
        self.matrix.cols() / self.block_len
    }

    pub fn col(&self, j: usize) -> &[f64] {
        self.matrix.col(j)
    }

    pub fn block_columns(&self, block: usize) -> Range<usize> {
        block * self.block_len..(block + 1) * self.block_len
    }

    /// Same columns, different block grouping.
    pub fn with_block_len(&self, block_len: usize) -> Result<Self> {
        if block_len == 0 || !self.cols().is_multiple_of(block_len) {
            return Err(Error::Config(format!(
                "block length {block_len} does not divide column count {}",
                self.cols()
            )));
        }
        Ok(Self {
            matrix: self.matrix.clone(),
            block_len,
            renormalization: self.renormalization,
        })
    }

    /// Largest `|x_iᵀ x_j|` over distinct columns.
    pub fn mutual_coherence(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.cols() {
            for j in (i + 1)..self.cols() {
                best = best.max(dot(self.col(i), self.col(j)).abs());
            }
        }
        best
    }
}

/// Thin QR factorization of `X[:, S]` grown one column at a time, together
/// with the current residual `(I - P(S)) Y`.
///
/// Each new column is orthogonalized twice (classical Gram–Schmidt with one
/// reorthogonalization pass).
#[derive(Debug, Clone)]
pub struct LsFactorization {
    y: Matrix,
    support: Vec<usize>,
    /// Orthonormal basis, one `n`-vector per support column.
    q: Vec<Vec<f64>>,
    /// Column `j` of the triangular factor, length `j + 1`.
    r: Vec<Vec<f64>>,
    /// `qᵀ Y` for each basis vector.
    qty: Vec<Vec<f64>>,
    residual: Matrix,
}

impl LsFactorization {
    /// Empty support; the residual is `Y` itself.
    pub fn new(y: &Matrix) -> Self {
        Self {
            y: y.clone(),
            support: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
            qty: Vec::new(),
            residual: y.clone(),
        }
    }

    /// Factorization of `X[:, support]` built column by column.
    pub fn from_support(y: &Matrix, x: &DesignMatrix, support: &[usize]) -> Result<Self> {
        check_rows(y, x)?;
        let mut f = Self::new(y);
        f.extend(x, support)?;
        Ok(f)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn observations(&self) -> &Matrix {
        &self.y
    }

    pub fn residual(&self) -> &Matrix {
        &self.residual
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual.frobenius_norm()
    }

    /// Appends `new_cols` to the support.
    ///
    /// On a rank failure the factorization is left exactly as it was and the
    /// error lists the offending column.
    pub fn extend(&mut self, x: &DesignMatrix, new_cols: &[usize]) -> Result<()> {
        check_rows(&self.y, x)?;
        let base = self.q.len();
        for &col in new_cols {
            if col >= x.cols() {
                self.truncate(base);
                return Err(Error::Config(format!(
                    "column {col} out of range for {} columns",
                    x.cols()
                )));
            }
            if let Err(e) = self.push_column(x.col(col), col) {
                self.truncate(base);
                return Err(e);
            }
        }
        for k in base..self.q.len() {
            let qk = &self.q[k];
            for l in 0..self.residual.cols() {
                let res = self.residual.col_mut(l);
                let c = dot(qk, res);
                axpy(-c, qk, res);
            }
        }
        Ok(())
    }

    fn push_column(&mut self, column: &[f64], index: usize) -> Result<()> {
        let mut v = column.to_vec();
        let mut rcol = vec![0.0; self.q.len() + 1];
        for _ in 0..2 {
            for (qi, ri) in self.q.iter().zip(rcol.iter_mut()) {
                let h = dot(qi, &v);
                axpy(-h, qi, &mut v);
                *ri += h;
            }
        }
        let norm = sqrt(dot(&v, &v));
        if !(norm >= RANK_TOL) {
            return Err(Error::RankDeficient {
                columns: {
                    let mut cols = self.support.clone();
                    cols.push(index);
                    cols
                },
            });
        }
        v.iter_mut().for_each(|e| *e /= norm);
        *rcol.last_mut().expect("non-empty") = norm;
        let qty = (0..self.y.cols()).map(|l| dot(&v, self.y.col(l))).collect();
        self.q.push(v);
        self.r.push(rcol);
        self.qty.push(qty);
        self.support.push(index);
        Ok(())
    }

    fn truncate(&mut self, len: usize) {
        self.q.truncate(len);
        self.r.truncate(len);
        self.qty.truncate(len);
        self.support.truncate(len);
    }

    /// Least-squares coefficients for the support columns, `card(S) × L`,
    /// row order matching [`support`](Self::support).
    pub fn coefficients(&self) -> Matrix {
        let k = self.q.len();
        let num_vectors = self.y.cols();
        let mut out = Matrix::zeros(k, num_vectors);
        for l in 0..num_vectors {
            for i in (0..k).rev() {
                let mut acc = self.qty[i][l];
                for j in (i + 1)..k {
                    acc -= self.r[j][i] * out[(j, l)];
                }
                out[(i, l)] = acc / self.r[i][i];
            }
        }
        out
    }

    /// Full `p × L` estimate: least squares on the support, zero elsewhere.
    pub fn estimate(&self, p: usize) -> Matrix {
        let coef = self.coefficients();
        let mut out = Matrix::zeros(p, self.y.cols());
        for (row, &idx) in self.support.iter().enumerate() {
            for l in 0..self.y.cols() {
                out[(idx, l)] = coef[(row, l)];
            }
        }
        out
    }
}

fn check_rows(y: &Matrix, x: &DesignMatrix) -> Result<()> {
    if y.rows() != x.rows() {
        return Err(Error::Config(format!(
            "observations have {} rows but the design has {}",
            y.rows(),
            x.rows()
        )));
    }
    Ok(())
}

/// `B̂` with `B̂[S,:] = X[:,S]† Y` and zero rows off the support.
pub fn ls_estimate(y: &Matrix, x: &DesignMatrix, support: &[usize]) -> Result<Matrix> {
    Ok(LsFactorization::from_support(y, x, support)?.estimate(x.cols()))
}

/// `(I - P(S)) Y`.
pub fn residual(y: &Matrix, x: &DesignMatrix, support: &[usize]) -> Result<Matrix> {
    Ok(LsFactorization::from_support(y, x, support)?
        .residual()
        .clone())
}
