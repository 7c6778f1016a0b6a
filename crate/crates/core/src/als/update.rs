//! Single-block updates. Each factor update solves its columns in index
//! order against the freshest values of the other columns (Gauss-Seidel);
//! every column subproblem is a rank-one least-squares fit solved exactly by
//! projection.

use alloc::vec;
use alloc::vec::Vec;

use super::config::{BlockConstraints, ConstraintConfig};
use super::model::{FactorModel, ModelKind};
use crate::error::{dim_err, Result};
use crate::math;
use crate::matrix::{kronecker, solve_linear, Matrix};
use crate::qp::{self, solve_box_l1_qp, solve_rank1_from_moments, SolveReport, DEGENERATE_NORM_SQ};
use crate::tensor::{mode_product, superdiagonal, unfold, Mode, Tensor3};

/// Column violations this small still count as feasible when deciding
/// whether to keep a previous column.
const KEEP_FEASIBLE_TOL: f64 = 1e-12;
const NNLS_TOL: f64 = 1e-13;
const NNLS_MAX_OUTER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate {
    pub factor: Matrix,
    /// Columns whose design had numerically zero norm.
    pub degenerate_columns: Vec<usize>,
    /// Largest constraint violation of the updated block.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreUpdate {
    pub core: Tensor3,
    pub report: SolveReport,
}

/// Moments `(P, Q)` of a mode-`n` least-squares problem
/// `||T_(n) - X W||^2`: `P = T_(n) W^T` and `Q = W W^T`, with
/// `W = G_(n) (kron of the other factors)^T`.
fn tensor_moments(t: &Tensor3, m: &FactorModel, mode: Mode) -> Result<(Matrix, Matrix)> {
    match m.kind {
        ModelKind::Cp => cp_moments(t, m, mode),
        ModelKind::Tucker3 => tucker_moments(t, m, mode),
    }
}

fn tucker_moments(t: &Tensor3, m: &FactorModel, mode: Mode) -> Result<(Matrix, Matrix)> {
    let (a, b, c) = (&m.a, &m.b, &m.c);
    let (z, gram) = match mode {
        Mode::One => {
            let z = mode_product(&mode_product(t, Mode::Two, &b.transpose())?, Mode::Three, &c.transpose())?;
            (z, kronecker(&c.gram(), &b.gram()))
        }
        Mode::Two => {
            let z = mode_product(&mode_product(t, Mode::One, &a.transpose())?, Mode::Three, &c.transpose())?;
            (z, kronecker(&c.gram(), &a.gram()))
        }
        Mode::Three => {
            let z = mode_product(&mode_product(t, Mode::One, &a.transpose())?, Mode::Two, &b.transpose())?;
            (z, kronecker(&b.gram(), &a.gram()))
        }
    };
    let g = unfold(&m.core, mode);
    let gt = g.transpose();
    let p = unfold(&z, mode).matmul(&gt)?;
    let q = g.matmul(&gram)?.matmul(&gt)?;
    Ok((p, q))
}

/// CP shortcut: `W = diag(w) (X ⊙ Y)^T`, so `P = T_(n) (X ⊙ Y) diag(w)` and
/// `Q = diag(w) (X^T X ∘ Y^T Y) diag(w)`.
fn cp_moments(t: &Tensor3, m: &FactorModel, mode: Mode) -> Result<(Matrix, Matrix)> {
    let w = superdiagonal(&m.core);
    let r = w.len();
    let (i_n, j_n, k_n) = t.dims();
    let (a, b, c) = (&m.a, &m.b, &m.c);
    let rows = match mode {
        Mode::One => i_n,
        Mode::Two => j_n,
        Mode::Three => k_n,
    };
    let mut p = Matrix::zeros(rows, r);
    let mut buf = vec![0.0; r];
    for k in 0..k_n {
        for j in 0..j_n {
            for i in 0..i_n {
                let v = t.get(i, j, k);
                if v == 0.0 {
                    continue;
                }
                let (row, x, y) = match mode {
                    Mode::One => (i, b.row(j), c.row(k)),
                    Mode::Two => (j, a.row(i), c.row(k)),
                    Mode::Three => (k, a.row(i), b.row(j)),
                };
                for s in 0..r {
                    buf[s] = v * x[s] * y[s];
                }
                for s in 0..r {
                    let cur = p.get(row, s);
                    p.set(row, s, cur + buf[s]);
                }
            }
        }
    }
    for s in 0..r {
        p.scale_column(s, w[s]);
    }
    let had = match mode {
        Mode::One => c.gram().hadamard(&b.gram())?,
        Mode::Two => c.gram().hadamard(&a.gram())?,
        Mode::Three => b.gram().hadamard(&a.gram())?,
    };
    let mut q = had;
    for s in 0..r {
        for u in 0..r {
            q.set(s, u, q.get(s, u) * w[s] * w[u]);
        }
    }
    Ok((p, q))
}

/// Minimizes `||X W||^2 - 2 tr(X^T P)` (the least-squares objective up to a
/// constant) over `bc`, with `Q = W W^T`. Sign-only blocks separate by row
/// and are solved exactly; otherwise one Gauss-Seidel pass over the columns.
fn column_sweep(current: &Matrix, p: &Matrix, q: &Matrix, bc: &BlockConstraints) -> BlockUpdate {
    let mut x = current.clone();
    let mut degenerate_columns = Vec::new();
    let exact = bc.l1_eps.is_none() && (bc.orth_eps.is_none() || x.cols() < 2);
    if !(exact && rowwise_exact(&mut x, p, q, bc.nonneg, &mut degenerate_columns)) {
        x = current.clone();
        degenerate_columns.clear();
        column_pass(&mut x, p, q, bc, &mut degenerate_columns);
    }
    let violation = block_violation(&x, bc);
    BlockUpdate { factor: x, degenerate_columns, violation }
}

/// Row-by-row solve of `min x^T Q x - 2 p_i^T x` (with `x >= 0` if
/// `nonneg`). Columns with a numerically zero design keep their values.
/// Returns false when a reduced Gram matrix is singular.
fn rowwise_exact(x: &mut Matrix, p: &Matrix, q: &Matrix, nonneg: bool, degenerate: &mut Vec<usize>) -> bool {
    let (n, r) = x.shape();
    let live: Vec<usize> = (0..r).filter(|&c| q.get(c, c) >= DEGENERATE_NORM_SQ).collect();
    degenerate.extend((0..r).filter(|c| !live.contains(c)));
    if live.is_empty() {
        return true;
    }
    let ql = principal_submatrix(q, &live);
    let mut rhs = vec![0.0; live.len()];
    for i in 0..n {
        for (idx, &c) in live.iter().enumerate() {
            let mut s = p.get(i, c);
            for d in 0..r {
                if !live.contains(&d) {
                    s -= q.get(c, d) * x.get(i, d);
                }
            }
            rhs[idx] = s;
        }
        let sol = if nonneg { nnls_gram(&ql, &rhs) } else { solve_linear(&ql, &rhs) };
        let Some(sol) = sol else { return false };
        for (idx, &c) in live.iter().enumerate() {
            x.set(i, c, sol[idx]);
        }
    }
    true
}

fn principal_submatrix(q: &Matrix, idx: &[usize]) -> Matrix {
    let values = idx.iter().flat_map(|&a| idx.iter().map(move |&b| q.get(a, b))).collect();
    Matrix::new(idx.len(), idx.len(), values).expect("finite gram")
}

/// Lawson-Hanson active set for `min 1/2 x^T Q x - b^T x`, `x >= 0`.
fn nnls_gram(q: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let r = b.len();
    let mut x = vec![0.0; r];
    let mut passive = vec![false; r];
    let scale = b.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    if scale == 0.0 {
        return Some(x);
    }
    let tol = NNLS_TOL * scale;
    for _ in 0..NNLS_MAX_OUTER * r {
        let w: Vec<f64> = (0..r).map(|j| b[j] - (0..r).map(|k| q.get(j, k) * x[k]).sum::<f64>()).collect();
        let enter = (0..r).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &c| w[a].total_cmp(&w[c]).then(c.cmp(&a)));
        let Some(j) = enter else { return Some(x) };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..r).filter(|&k| passive[k]).collect();
            let z = solve_linear(&principal_submatrix(q, &idx), &idx.iter().map(|&k| b[k]).collect::<Vec<_>>())?;
            if z.iter().all(|v| *v > 0.0) {
                for k in 0..r {
                    x[k] = 0.0;
                }
                for (t, &k) in idx.iter().enumerate() {
                    x[k] = z[t];
                }
                break;
            }
            // Step toward z until the first passive variable hits zero.
            let mut alpha = 1.0f64;
            let mut blocking = None;
            for (t, &k) in idx.iter().enumerate() {
                if z[t] <= 0.0 {
                    let a = x[k] / (x[k] - z[t]);
                    if a < alpha || blocking.is_none() {
                        alpha = alpha.min(a);
                        blocking = Some(k);
                    }
                }
            }
            for (t, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z[t] - x[k]);
            }
            if let Some(k) = blocking {
                x[k] = 0.0;
                passive[k] = false;
            }
            for &k in &idx {
                if x[k] <= 0.0 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Some(x)
}

fn column_pass(x: &mut Matrix, p: &Matrix, q: &Matrix, bc: &BlockConstraints, degenerate_columns: &mut Vec<usize>) {
    let (n, r) = x.shape();
    let mut rf = vec![0.0; n];
    for col in 0..r {
        let ff = q.get(col, col);
        for i in 0..n {
            let xi = x.row(i);
            let mut s = p.get(i, col);
            for other in 0..r {
                if other != col {
                    s -= xi[other] * q.get(other, col);
                }
            }
            rf[i] = s;
        }
        let fixed: Vec<Vec<f64>> = (0..r).filter(|o| *o != col).map(|o| x.column(o)).collect();
        let cons = bc.column(fixed);
        let prev = x.column(col);
        let prev_ok = cons.violation(&prev) <= KEEP_FEASIBLE_TOL;
        let next = if !(ff >= DEGENERATE_NORM_SQ) {
            degenerate_columns.push(col);
            if prev_ok {
                prev
            } else {
                qp::project_feasible(&prev, &cons)
            }
        } else {
            let rep = solve_rank1_from_moments(&rf, ff, &cons);
            let prev_obj = ff * math::dot(&prev, &prev) - 2.0 * math::dot(&prev, &rf);
            if prev_ok && prev_obj < rep.residual {
                prev
            } else {
                rep.solution
            }
        };
        x.set_column(col, &next);
    }
}

/// Largest violation of `bc` over all columns and column pairs of `x`.
pub fn block_violation(x: &Matrix, bc: &BlockConstraints) -> f64 {
    let cols = x.columns();
    let mut worst: f64 = 0.0;
    for (r, col) in cols.iter().enumerate() {
        if bc.nonneg {
            for v in col {
                worst = worst.max(-v);
            }
        }
        if let Some(eps) = bc.l1_eps {
            worst = worst.max(math::norm1(col) - eps);
        }
        if let Some(eps) = bc.orth_eps {
            for other in cols.iter().skip(r + 1) {
                worst = worst.max(math::dot(col, other) - eps);
            }
        }
    }
    worst
}

fn check_shapes(t: &Tensor3, m: &FactorModel) -> Result<()> {
    m.validate()?;
    let (i, j, k, _) = m.dims();
    if t.dims() != (i, j, k) {
        return Err(dim_err!("tensor {:?} does not match model dims ({i}, {j}, {k})", t.dims()));
    }
    Ok(())
}

/// Coupled update of `A` against `[T_(1)  sqrt(lambda) Y]`.
pub fn update_factor_a(t: &Tensor3, y: &Matrix, m: &FactorModel, cfg: &ConstraintConfig) -> Result<BlockUpdate> {
    check_shapes(t, m)?;
    if y.shape() != (m.a.rows(), m.d.rows()) {
        return Err(dim_err!("side matrix {:?} does not match (I, F) = ({}, {})", y.shape(), m.a.rows(), m.d.rows()));
    }
    let (mut p, mut q) = tensor_moments(t, m, Mode::One)?;
    let lambda = cfg.coupling_weight;
    if lambda != 0.0 && m.d.rows() > 0 {
        p.add_scaled(&y.matmul(&m.d)?, lambda)?;
        q.add_scaled(&m.d.gram(), lambda)?;
    }
    Ok(column_sweep(&m.a, &p, &q, &cfg.a))
}

pub fn update_factor_b(t: &Tensor3, m: &FactorModel, cfg: &ConstraintConfig) -> Result<BlockUpdate> {
    check_shapes(t, m)?;
    let (p, q) = tensor_moments(t, m, Mode::Two)?;
    Ok(column_sweep(&m.b, &p, &q, &cfg.b))
}

pub fn update_factor_c(t: &Tensor3, m: &FactorModel, cfg: &ConstraintConfig) -> Result<BlockUpdate> {
    check_shapes(t, m)?;
    let (p, q) = tensor_moments(t, m, Mode::Three)?;
    Ok(column_sweep(&m.c, &p, &q, &cfg.c))
}

/// Update of `D` from `||Y^T - D A^T||`.
pub fn update_factor_d(y: &Matrix, m: &FactorModel, cfg: &ConstraintConfig) -> Result<BlockUpdate> {
    m.validate()?;
    if y.shape() != (m.a.rows(), m.d.rows()) {
        return Err(dim_err!("side matrix {:?} does not match (I, F) = ({}, {})", y.shape(), m.a.rows(), m.d.rows()));
    }
    let p = y.t_matmul(&m.a)?;
    let q = m.a.gram();
    Ok(column_sweep(&m.d, &p, &q, &cfg.d))
}

/// `(C ⊗ B ⊗ A)^T (C ⊗ B ⊗ A)`, assembled from the factor Gram matrices.
pub fn core_gram(m: &FactorModel) -> Matrix {
    kronecker(&m.c.gram(), &kronecker(&m.b.gram(), &m.a.gram()))
}

/// `(C ⊗ B ⊗ A)^T vec(T)`.
pub fn core_linear_term(t: &Tensor3, m: &FactorModel) -> Result<Vec<f64>> {
    let z = mode_product(t, Mode::One, &m.a.transpose())?;
    let z = mode_product(&z, Mode::Two, &m.b.transpose())?;
    let z = mode_product(&z, Mode::Three, &m.c.transpose())?;
    Ok(z.values().to_vec())
}

/// Constrained least-squares core update, warm-started from the current core.
pub fn update_core(t: &Tensor3, m: &FactorModel, cfg: &ConstraintConfig) -> Result<CoreUpdate> {
    check_shapes(t, m)?;
    let gram = core_gram(m);
    let linear = core_linear_term(t, m)?;
    let cons = cfg.core.as_column();
    let report = solve_box_l1_qp(&gram, &linear, &cons, qp::default_tol(&linear), Some(m.core.values()))?;
    let core = Tensor3::new(m.core.dims(), report.solution.clone())?;
    Ok(CoreUpdate { core, report })
}
