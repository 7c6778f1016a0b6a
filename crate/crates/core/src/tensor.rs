//! Dense 3-mode tensors in first-mode-fastest layout, mode-n unfoldings and
//! the Tucker/CP reconstructions built on them.
//!
//! Unfolding convention: mode 1 is `I x (J*K)` with column `j + J*k`,
//! mode 2 is `J x (I*K)` with column `i + I*k`, mode 3 is `K x (I*J)` with
//! column `i + I*j`. With it `T_(1) = A G_(1) (C ⊗ B)^T`,
//! `T_(2) = B G_(2) (C ⊗ A)^T` and `T_(3) = C G_(3) (B ⊗ A)^T`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// One of the three tensor modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Maps 1, 2, 3 to a mode.
    pub fn from_index(n: usize) -> Result<Mode> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::Input(alloc::format!("mode must be 1, 2 or 3, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if values.len() != n {
            return Err(dim_err!("tensor {:?} needs {n} values, got {}", dims, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("tensor entries must be finite".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self { dims, values: vec![0.0; dims.0 * dims.1 * dims.2] }
    }

    /// Builds a tensor by evaluating `f(i, j, k)` at every index.
    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    values.push(f(i, j, k));
                }
            }
        }
        Self { dims, values }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.values[o] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::norm2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, math::abs(*v)))
    }

    pub fn scaled(&self, factor: f64) -> Tensor3 {
        Tensor3 { dims: self.dims, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Multiplies every entry whose index along `mode` equals `index`.
    pub fn scale_slice(&mut self, mode: Mode, index: usize, factor: f64) {
        let (i_n, j_n, k_n) = self.dims;
        match mode {
            Mode::One => {
                for k in 0..k_n {
                    for j in 0..j_n {
                        let o = self.offset(index, j, k);
                        self.values[o] *= factor;
                    }
                }
            }
            Mode::Two => {
                for k in 0..k_n {
                    for i in 0..i_n {
                        let o = self.offset(i, index, k);
                        self.values[o] *= factor;
                    }
                }
            }
            Mode::Three => {
                let start = self.offset(0, 0, index);
                for v in &mut self.values[start..start + i_n * j_n] {
                    *v *= factor;
                }
            }
        }
    }

    /// L1 norm of the entries.
    pub fn norm1(&self) -> f64 {
        math::norm1(&self.values)
    }
}

fn unfold_shape(mode: Mode, dims: (usize, usize, usize)) -> (usize, usize) {
    let (i, j, k) = dims;
    match mode {
        Mode::One => (i, j * k),
        Mode::Two => (j, i * k),
        Mode::Three => (k, i * j),
    }
}

/// Mode-n matricization.
pub fn unfold(t: &Tensor3, mode: Mode) -> Matrix {
    let (i_n, j_n, k_n) = t.dims;
    let (rows, cols) = unfold_shape(mode, t.dims);
    let mut out = Matrix::zeros(rows, cols);
    let vals = out.values_mut();
    for k in 0..k_n {
        for j in 0..j_n {
            for i in 0..i_n {
                let v = t.get(i, j, k);
                let (r, c) = match mode {
                    Mode::One => (i, j + j_n * k),
                    Mode::Two => (j, i + i_n * k),
                    Mode::Three => (k, i + i_n * j),
                };
                vals[r * cols + c] = v;
            }
        }
    }
    out
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
    let expected = unfold_shape(mode, dims);
    if m.shape() != expected {
        return Err(dim_err!(
            "cannot fold {:?} into {:?} along {:?}; expected {:?}",
            m.shape(),
            dims,
            mode,
            expected
        ));
    }
    let (i_n, j_n, _) = dims;
    Ok(Tensor3::from_fn(dims, |i, j, k| match mode {
        Mode::One => m.get(i, j + j_n * k),
        Mode::Two => m.get(j, i + i_n * k),
        Mode::Three => m.get(k, i + i_n * j),
    }))
}

/// `vec(t)`: the stored first-mode-fastest layout.
pub fn vectorize(t: &Tensor3) -> Vec<f64> {
    t.values.clone()
}

/// Mode-n product `t x_n m`, where `m` is `new_dim x dim_n`.
pub fn mode_product(t: &Tensor3, mode: Mode, m: &Matrix) -> Result<Tensor3> {
    let (i_n, j_n, k_n) = t.dims;
    let old = match mode {
        Mode::One => i_n,
        Mode::Two => j_n,
        Mode::Three => k_n,
    };
    if m.cols() != old {
        return Err(dim_err!(
            "mode-{:?} product needs a matrix with {old} columns, got {:?}",
            mode,
            m.shape()
        ));
    }
    let new = m.rows();
    let dims = match mode {
        Mode::One => (new, j_n, k_n),
        Mode::Two => (i_n, new, k_n),
        Mode::Three => (i_n, j_n, new),
    };
    let mut out = Tensor3::zeros(dims);
    match mode {
        Mode::One => {
            for k in 0..k_n {
                for j in 0..j_n {
                    let src = &t.values[t.offset(0, j, k)..t.offset(0, j, k) + i_n];
                    for p in 0..new {
                        let v = math::dot(m.row(p), src);
                        let o = out.offset(p, j, k);
                        out.values[o] = v;
                    }
                }
            }
        }
        Mode::Two => {
            for k in 0..k_n {
                for p in 0..new {
                    let row = m.row(p);
                    for (j, w) in row.iter().enumerate() {
                        if *w == 0.0 {
                            continue;
                        }
                        let src = t.offset(0, j, k);
                        let dst = out.offset(0, p, k);
                        for i in 0..i_n {
                            out.values[dst + i] += w * t.values[src + i];
                        }
                    }
                }
            }
        }
        Mode::Three => {
            let plane = i_n * j_n;
            for p in 0..new {
                let row = m.row(p);
                for (k, w) in row.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let src = k * plane;
                    let dst = p * plane;
                    for x in 0..plane {
                        out.values[dst + x] += w * t.values[src + x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `g x1 a x2 b x3 c`.
pub fn tucker_reconstruct(g: &Tensor3, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Tensor3> {
    let (r1, r2, r3) = g.dims;
    if a.cols() != r1 || b.cols() != r2 || c.cols() != r3 {
        return Err(dim_err!(
            "core {:?} incompatible with factor widths ({}, {}, {})",
            g.dims,
            a.cols(),
            b.cols(),
            c.cols()
        ));
    }
    let x = mode_product(g, Mode::One, a)?;
    let x = mode_product(&x, Mode::Two, b)?;
    mode_product(&x, Mode::Three, c)
}

/// Sum of rank-one terms `sum_r w[r] a_r ∘ b_r ∘ c_r`.
pub fn cp_reconstruct(weights: &[f64], a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Tensor3> {
    let r = weights.len();
    if a.cols() != r || b.cols() != r || c.cols() != r {
        return Err(dim_err!("CP rank {r} incompatible with factor widths"));
    }
    // T_(1) = A diag(w) (C ⊙ B)^T
    let kr = crate::matrix::khatri_rao(c, b)?;
    let mut aw = a.clone();
    for (col, w) in weights.iter().enumerate() {
        aw.scale_column(col, *w);
    }
    let unfolded = aw.matmul(&kr.transpose())?;
    fold(&unfolded, Mode::One, (a.rows(), b.rows(), c.rows()))
}

/// `r x r x r` tensor with `weights` on the superdiagonal.
pub fn superdiagonal_core(weights: &[f64]) -> Tensor3 {
    let r = weights.len();
    let mut g = Tensor3::zeros((r, r, r));
    for (p, w) in weights.iter().enumerate() {
        g.set(p, p, p, *w);
    }
    g
}

/// The superdiagonal of a cubic core.
pub fn superdiagonal(g: &Tensor3) -> Vec<f64> {
    let r = g.dims.0.min(g.dims.1).min(g.dims.2);
    (0..r).map(|p| g.get(p, p, p)).collect()
}

/// Frobenius distance between two tensors of equal shape.
pub fn frobenius_error(x: &Tensor3, y: &Tensor3) -> Result<f64> {
    if x.dims != y.dims {
        return Err(dim_err!("frobenius error of {:?} and {:?}", x.dims, y.dims));
    }
    let ss: f64 = x.values.iter().zip(&y.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(math::sqrt(ss))
}

/// Sparse coordinate tensor with strictly positive entries, used as the
/// interchange form for count tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CooTensor {
    dims: (usize, usize, usize),
    entries: Vec<(usize, usize, usize, f64)>,
}

impl CooTensor {
    /// Canonicalizes `entries`: duplicates are summed, zero sums dropped and
    /// the result sorted by `(k, j, i)` to match the dense layout.
    pub fn new(dims: (usize, usize, usize), entries: Vec<(usize, usize, usize, f64)>) -> Result<Self> {
        for &(i, j, k, v) in &entries {
            if i >= dims.0 || j >= dims.1 || k >= dims.2 {
                return Err(dim_err!("entry ({i}, {j}, {k}) out of range for {:?}", dims));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Input(alloc::format!(
                    "entry ({i}, {j}, {k}) has non-positive or non-finite value {v}"
                )));
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| (a.2, a.1, a.0).cmp(&(b.2, b.1, b.0)));
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (e.0, e.1, e.2) => last.3 += e.3,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.3 > 0.0);
        Ok(Self { dims, entries: merged })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.3).sum()
    }

    pub fn to_dense(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.dims);
        for &(i, j, k, v) in &self.entries {
            t.set(i, j, k, v);
        }
        t
    }

    /// Positive entries of a dense tensor.
    pub fn from_dense(t: &Tensor3) -> Result<Self> {
        let (i_n, j_n, k_n) = t.dims();
        let mut entries = Vec::new();
        for k in 0..k_n {
            for j in 0..j_n {
                for i in 0..i_n {
                    let v = t.get(i, j, k);
                    if v > 0.0 {
                        entries.push((i, j, k, v));
                    } else if v < 0.0 {
                        return Err(Error::Input("count tensors cannot hold negative entries".into()));
                    }
                }
            }
        }
        Ok(Self { dims: t.dims(), entries })
    }
}
