//! Projection onto the base set intersected with a few halfspaces, solved in
//! the multipliers of the halfspaces by projected Newton.
//!
//! For multipliers `mu >= 0` the Lagrangian minimizer is
//! `x(mu) = P_base(v - H mu)`, and the dual `phi(mu)` is concave, piecewise
//! quadratic and continuously differentiable with gradient `H^T x(mu) - e`.

use alloc::vec;
use alloc::vec::Vec;

use super::ColumnConstraints;
use crate::math;
use crate::matrix::{solve_linear, Matrix};

const MAX_NEWTON: usize = 100;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Base-set projection together with the support and the L1 multiplier
/// structure needed for the generalized Jacobian.
pub(super) struct BaseProjection {
    pub point: Vec<f64>,
    /// Indices with a nonzero Jacobian row.
    pub support: Vec<usize>,
    /// Set when the L1 bound is active; the Jacobian on `support` is then
    /// `I - s s^T / |support|` with `s` the signs.
    pub l1_active: bool,
}

pub(super) fn base_projection(y: &[f64], c: &ColumnConstraints, project: impl Fn(&[f64]) -> Vec<f64>) -> BaseProjection {
    let point = project(y);
    let support: Vec<usize> = match (c.nonneg, c.l1_bound) {
        (false, None) => (0..y.len()).collect(),
        _ => (0..y.len()).filter(|&k| point[k] != 0.0).collect(),
    };
    let l1_active = match c.l1_bound {
        None => false,
        Some(eps) => {
            let mass: f64 = if c.nonneg { y.iter().map(|v| v.max(0.0)).sum() } else { math::norm1(y) };
            mass > eps
        }
    };
    BaseProjection { point, support, l1_active }
}

pub(super) struct DualSolution {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub certified: bool,
}

/// `halfspaces` are `(h_j, e_j)`. Returns the primal point for the best
/// multipliers and whether the KKT conditions were met to `tol`.
pub(super) fn project_dual(
    v: &[f64],
    halfspaces: &[(&[f64], f64)],
    c: &ColumnConstraints,
    project: impl Fn(&[f64]) -> Vec<f64> + Copy,
    tol: f64,
) -> DualSolution {
    let m = halfspaces.len();
    let n = v.len();
    let eval = |mu: &[f64]| -> (BaseProjection, f64, Vec<f64>) {
        let mut y = v.to_vec();
        for (j, (h, _)) in halfspaces.iter().enumerate() {
            if mu[j] != 0.0 {
                for k in 0..n {
                    y[k] -= mu[j] * h[k];
                }
            }
        }
        let bp = base_projection(&y, c, project);
        let x = &bp.point;
        let mut psi = 0.0;
        for k in 0..n {
            psi += (x[k] - v[k]) * (x[k] - v[k]);
        }
        psi *= -0.5;
        // gradient of psi = -phi
        let mut grad = vec![0.0; m];
        for (j, (h, e)) in halfspaces.iter().enumerate() {
            let slack = e - math::dot(h, x);
            grad[j] = slack;
            psi -= mu[j] * (math::dot(h, x) - e);
        }
        (bp, psi, grad)
    };

    let mut mu = vec![0.0; m];
    let (mut bp, mut psi, mut grad) = eval(&mu);
    let mut iterations = 0;
    let mut certified = false;
    while iterations < MAX_NEWTON {
        let residual = (0..m).map(|j| math::abs(mu[j] - (mu[j] - grad[j]).max(0.0))).fold(0.0, f64::max);
        if residual <= tol {
            certified = true;
            break;
        }
        iterations += 1;

        // Multipliers within `residual` of zero that the gradient pushes
        // into the bound are held by a gradient step; the rest take a Newton
        // step.
        let free: Vec<usize> = (0..m).filter(|&j| !(mu[j] <= residual && grad[j] > 0.0)).collect();
        let hess = generalized_hessian(halfspaces, &bp, &free);
        let rhs: Vec<f64> = free.iter().map(|&j| -grad[j]).collect();
        let mut newton = vec![0.0; m];
        for j in 0..m {
            newton[j] = -grad[j];
        }
        if let Some(d) = solve_linear(&hess, &rhs) {
            for (idx, &j) in free.iter().enumerate() {
                newton[j] = d[idx];
            }
        }
        let gradient: Vec<f64> = grad.iter().map(|g| -g).collect();

        let mut accepted = false;
        for dir in [&newton, &gradient] {
            let mut alpha = 1.0;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = (0..m).map(|j| (mu[j] + alpha * dir[j]).max(0.0)).collect();
                let (tbp, tpsi, tgrad) = eval(&trial);
                let decrease: f64 = (0..m).map(|j| grad[j] * (trial[j] - mu[j])).sum();
                if tpsi <= psi + ARMIJO * decrease && decrease < 0.0 {
                    mu = trial;
                    bp = tbp;
                    psi = tpsi;
                    grad = tgrad;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    DualSolution { point: bp.point, iterations, certified }
}

/// `H_F^T J H_F` with a small ridge so rank-deficient designs stay solvable.
fn generalized_hessian(halfspaces: &[(&[f64], f64)], bp: &BaseProjection, free: &[usize]) -> Matrix {
    let f = free.len();
    let mut out = Matrix::zeros(f, f);
    let s = &bp.support;
    let sign = |k: usize| if bp.point[k] < 0.0 { -1.0 } else { 1.0 };
    let signed_sums: Vec<f64> = free
        .iter()
        .map(|&j| s.iter().map(|&k| sign(k) * halfspaces[j].0[k]).sum())
        .collect();
    let mut trace = 0.0;
    for a in 0..f {
        for b in a..f {
            let (ha, hb) = (halfspaces[free[a]].0, halfspaces[free[b]].0);
            let mut val: f64 = s.iter().map(|&k| ha[k] * hb[k]).sum();
            if bp.l1_active && !s.is_empty() {
                val -= signed_sums[a] * signed_sums[b] / s.len() as f64;
            }
            out.set(a, b, val);
            out.set(b, a, val);
        }
        trace += out.get(a, a);
    }
    let ridge = 1e-12 * (1.0 + trace);
    for a in 0..f {
        out.set(a, a, out.get(a, a) + ridge);
    }
    out
}
