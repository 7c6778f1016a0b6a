use alloc::vec;
use alloc::vec::Vec;

use super::{project_feasible_report, ColumnConstraints};
use crate::error::{dim_err, Result};
use crate::math;
use crate::matrix::Matrix;

/// Below this `||f||^2` a rank-one column subproblem is treated as degenerate.
pub const DEGENERATE_NORM_SQ: f64 = 1e-12;

const POWER_STEPS: usize = 50;
const LIPSCHITZ_SAFETY: f64 = 1.01;
const MAX_PG_ITERS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final subproblem objective.
    pub residual: f64,
    pub feasibility_violation: f64,
    pub converged: bool,
    /// Set when the design was (numerically) zero; the solution is then zero.
    pub degenerate: bool,
}

/// `||R - a f^T||_F` minimization over `c`, for an explicit residual `R`
/// (`n x m`) and design vector `f` (length `m`).
pub fn solve_rank1_column(residual: &Matrix, f: &[f64], c: &ColumnConstraints) -> Result<SolveReport> {
    if residual.cols() != f.len() {
        return Err(dim_err!("residual has {} columns, design has {}", residual.cols(), f.len()));
    }
    c.validate(residual.rows())?;
    let rf = residual.mat_vec(f)?;
    let ff = math::dot(f, f);
    let mut report = solve_rank1_from_moments(&rf, ff, c);
    let rsq = residual.frobenius_norm();
    report.residual += rsq * rsq;
    Ok(report)
}

/// Moment form of [`solve_rank1_column`]: with `rf = R f` and `ff = ||f||^2`
/// the optimum is the projection of `rf / ff`. `residual` in the report is
/// `||R - a f^T||^2 - ||R||^2`.
pub fn solve_rank1_from_moments(rf: &[f64], ff: f64, c: &ColumnConstraints) -> SolveReport {
    if !(ff >= DEGENERATE_NORM_SQ) {
        return SolveReport {
            solution: vec![0.0; rf.len()],
            iterations: 0,
            residual: 0.0,
            feasibility_violation: 0.0,
            converged: true,
            degenerate: true,
        };
    }
    let target: Vec<f64> = rf.iter().map(|v| v / ff).collect();
    let proj = project_feasible_report(&target, c);
    let residual = ff * math::dot(&proj.point, &proj.point) - 2.0 * math::dot(&proj.point, rf);
    let feasibility_violation = c.violation(&proj.point);
    SolveReport {
        solution: proj.point,
        iterations: proj.sweeps,
        residual,
        feasibility_violation,
        converged: proj.converged,
        degenerate: false,
    }
}

/// `1/2 x^T G x - b^T x`.
pub fn quadratic_objective(gram: &Matrix, linear: &[f64], x: &[f64]) -> f64 {
    let gx = gram.mat_vec(x).expect("shapes checked by caller");
    0.5 * math::dot(x, &gx) - math::dot(linear, x)
}

/// Default stopping tolerance for [`solve_box_l1_qp`]: `1e-9` times the
/// magnitude of the linear term.
pub fn default_tol(linear: &[f64]) -> f64 {
    let scale = linear.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    1e-9 * scale.max(1e-300)
}

/// Minimizes `1/2 x^T G x - b^T x` over `c` by projected gradient with step
/// `1/L`, `L` estimated by power iteration. Iterates stay feasible and the
/// best one seen is returned, so a feasible warm start is never worsened.
pub fn solve_box_l1_qp(
    gram: &Matrix,
    linear: &[f64],
    c: &ColumnConstraints,
    tol: f64,
    initial: Option<&[f64]>,
) -> Result<SolveReport> {
    let n = linear.len();
    if gram.shape() != (n, n) {
        return Err(dim_err!("gram {:?} does not match linear term of length {n}", gram.shape()));
    }
    if let Some(x0) = initial {
        if x0.len() != n {
            return Err(dim_err!("initial point has length {}, expected {n}", x0.len()));
        }
    }
    c.validate(n)?;

    let lipschitz = {
        let l = LIPSCHITZ_SAFETY * largest_eigenvalue(gram);
        if l > 1e-300 {
            l
        } else {
            1.0
        }
    };

    let start = initial.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let start_proj = project_feasible_report(&start, c);
    let mut x = start_proj.point;
    let mut best = x.clone();
    let mut best_obj = quadratic_objective(gram, linear, &x);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = vec![0.0; n];
    while iterations < MAX_PG_ITERS {
        iterations += 1;
        let gx = gram.mat_vec(&x)?;
        for i in 0..n {
            step[i] = x[i] - (gx[i] - linear[i]) / lipschitz;
        }
        let next = project_feasible_report(&step, c).point;
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
        x = next;
        let obj = quadratic_objective(gram, linear, &x);
        // Ties within rounding go to the later iterate, which is closer to
        // the optimum once objective values stop resolving the difference.
        if obj <= best_obj + 1e-15 * math::abs(best_obj) {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        if lipschitz * math::sqrt(moved) < tol {
            converged = true;
            break;
        }
    }
    let feasibility_violation = c.violation(&best);
    Ok(SolveReport {
        solution: best,
        iterations,
        residual: best_obj,
        feasibility_violation,
        converged,
        degenerate: false,
    })
}

/// Rayleigh quotient after a fixed number of power-iteration steps from a
/// deterministic start vector.
fn largest_eigenvalue(gram: &Matrix) -> f64 {
    let n = gram.rows();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_STEPS {
        let nv = math::norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        for x in &mut v {
            *x /= nv;
        }
        let w = gram.mat_vec(&v).expect("square");
        lambda = math::dot(&v, &w);
        v = w;
    }
    lambda.max(0.0)
}
