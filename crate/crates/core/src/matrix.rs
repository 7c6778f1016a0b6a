//! Dense row-major matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::math;

/// Dense real matrix stored row-major. Zero-sized shapes are allowed so a
/// first mode can be coupled to an empty side matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(dim_err!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut values = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            values.extend_from_slice(row);
        }
        Self { rows: r, cols: c, values }
    }

    /// Builds a matrix from its columns. Panics on ragged input.
    pub fn from_columns(columns: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            m.set_column(j, col);
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
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        for (r, v) in col.iter().enumerate() {
            self.values[r * self.cols + c] = *v;
        }
    }

    pub fn scale_column(&mut self, c: usize, factor: f64) {
        for r in 0..self.rows {
            self.values[r * self.cols + c] *= factor;
        }
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        t
    }

    /// `self * other`. Each output entry accumulates over the inner index in
    /// ascending order.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(dim_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.values[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let other_row = &other.values[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(dim_err!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, a) in a_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let out_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * self`.
    pub fn gram(&self) -> Matrix {
        self.t_matmul(self).expect("gram shapes always agree")
    }

    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(dim_err!("vector of length {} against {} columns", x.len(), self.cols));
        }
        Ok((0..self.rows).map(|r| math::dot(self.row(r), x)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Matrix, factor: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err!("cannot add {:?} to {:?}", other.shape(), self.shape()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Elementwise product with a matrix of the same shape.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(dim_err!("hadamard of {:?} and {:?}", self.shape(), other.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::norm2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, math::abs(*v)))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `1e-12` times the
/// largest entry of `a`.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return None;
    }
    let scale = a.max_abs().max(1e-300);
    let mut m = a.values.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if math::abs(m[r * n + col]) > math::abs(m[piv * n + col]) {
                piv = r;
            }
        }
        if math::abs(m[piv * n + col]) <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r * n + c] * x[c];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

/// Kronecker product: block `(r, c)` of the result is `p[r, c] * q`.
pub fn kronecker(p: &Matrix, q: &Matrix) -> Matrix {
    let rows = p.rows * q.rows;
    let cols = p.cols * q.cols;
    let mut out = Matrix::zeros(rows, cols);
    for pr in 0..p.rows {
        for pc in 0..p.cols {
            let s = p.get(pr, pc);
            for qr in 0..q.rows {
                let base = (pr * q.rows + qr) * cols + pc * q.cols;
                for qc in 0..q.cols {
                    out.values[base + qc] = s * q.get(qr, qc);
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker product.
pub fn khatri_rao(p: &Matrix, q: &Matrix) -> Result<Matrix> {
    if p.cols != q.cols {
        return Err(dim_err!("khatri-rao needs equal column counts, got {} and {}", p.cols, q.cols));
    }
    let cols = p.cols;
    let mut out = Matrix::zeros(p.rows * q.rows, cols);
    for pr in 0..p.rows {
        for qr in 0..q.rows {
            let row = pr * q.rows + qr;
            for c in 0..cols {
                out.values[row * cols + c] = p.get(pr, c) * q.get(qr, c);
            }
        }
    }
    Ok(out)
}

/// Frobenius distance between two matrices of equal shape.
pub fn frobenius_error(x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(dim_err!("frobenius error of {:?} and {:?}", x.shape(), y.shape()));
    }
    let ss: f64 = x.values.iter().zip(&y.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(math::sqrt(ss))
}
