//! Exhaustive active-set reference solver for tiny constrained QPs.
//!
//! Every subset of at most `n` constraints is treated as equalities and the
//! resulting KKT system solved directly; the best primal-feasible candidate is
//! the optimum for a positive definite Gram matrix. A signed L1 ball is split
//! into its `2^n` orthants, inside each of which it is a single halfspace.

use alloc::vec;
use alloc::vec::Vec;

use super::{quadratic_objective, ColumnConstraints};
use crate::error::{config_err, dim_err, Error, Result};
use crate::math;
use crate::matrix::{solve_linear, Matrix};

/// Largest dimension the enumeration accepts.
pub const MAX_ORACLE_DIM: usize = 6;
const FEAS_TOL: f64 = 1e-9;

/// Exact minimizer of `1/2 x^T G x - b^T x` over `c`.
pub fn reference_qp_oracle(gram: &Matrix, linear: &[f64], c: &ColumnConstraints) -> Result<Vec<f64>> {
    let n = linear.len();
    if n > MAX_ORACLE_DIM {
        return Err(config_err!("oracle accepts dimension <= {MAX_ORACLE_DIM}, got {n}"));
    }
    if gram.shape() != (n, n) {
        return Err(dim_err!("gram {:?} does not match dimension {n}", gram.shape()));
    }
    c.validate(n)?;

    let signed_l1 = !c.nonneg && c.l1_bound.is_some();
    let orthants: Vec<Vec<f64>> = if signed_l1 {
        (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect()
    } else {
        vec![vec![1.0; n]]
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for sigma in &orthants {
        let rows = constraint_rows(c, n, signed_l1.then_some(sigma.as_slice()));
        let m = rows.len();
        for mask in 0u64..(1u64 << m) {
            if mask.count_ones() as usize > n {
                continue;
            }
            let active: Vec<&(Vec<f64>, f64)> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| &rows[i]).collect();
            let Some(x) = kkt_point(gram, linear, &active) else { continue };
            if rows.iter().any(|(a, beta)| math::dot(a, &x) - beta > FEAS_TOL) {
                continue;
            }
            let obj = quadratic_objective(gram, linear, &x);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::Input("no KKT point found; the Gram matrix is likely singular".into()))
}

/// Constraints as rows `(a, beta)` meaning `a^T x <= beta`.
fn constraint_rows(c: &ColumnConstraints, n: usize, orthant: Option<&[f64]>) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::new();
    let unit = |i: usize, s: f64| {
        let mut a = vec![0.0; n];
        a[i] = s;
        a
    };
    if c.nonneg {
        for i in 0..n {
            rows.push((unit(i, -1.0), 0.0));
        }
    }
    if let Some(eps) = c.l1_bound {
        match orthant {
            Some(sigma) => {
                for i in 0..n {
                    rows.push((unit(i, -sigma[i]), 0.0));
                }
                rows.push((sigma.to_vec(), eps));
            }
            None => rows.push((vec![1.0; n], eps)),
        }
    }
    for (h, eps) in c.halfspaces() {
        rows.push((h.to_vec(), eps));
    }
    rows
}

fn kkt_point(gram: &Matrix, linear: &[f64], active: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = linear.len();
    let k = active.len();
    let size = n + k;
    let mut kkt = Matrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for i in 0..n {
        for j in 0..n {
            kkt.set(i, j, gram.get(i, j));
        }
        rhs[i] = linear[i];
    }
    for (r, (a, beta)) in active.iter().enumerate() {
        for j in 0..n {
            kkt.set(n + r, j, a[j]);
            kkt.set(j, n + r, a[j]);
        }
        rhs[n + r] = *beta;
    }
    let z = solve_linear(&kkt, &rhs)?;
    Some(z[..n].to_vec())
}
