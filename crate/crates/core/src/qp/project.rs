use alloc::vec;
use alloc::vec::Vec;

use super::dual::project_dual;
use super::ColumnConstraints;
use crate::math;

/// Sweep cap for Dykstra's alternating projections.
pub const MAX_SWEEPS: usize = 1000;
const MOVE_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-11;

/// Result of a Euclidean projection onto a column's feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Euclidean projection of `v` onto the feasible set described by `c`.
pub fn project_feasible(v: &[f64], c: &ColumnConstraints) -> Vec<f64> {
    project_feasible_report(v, c).point
}

/// Projection onto `{x >= 0 (optional)} ∩ {||x||_1 <= eps}` intersected with
/// the orthogonality halfspaces. The halfspace multipliers are found by a
/// projected Newton method on the dual; if that fails to certify its KKT
/// conditions, Dykstra's algorithm over the base set and every halfspace
/// takes over.
pub fn project_feasible_report(v: &[f64], c: &ColumnConstraints) -> Projection {
    let base = project_base(v, c);
    let halfspaces: Vec<(&[f64], f64, f64)> = c
        .halfspaces()
        .filter_map(|(h, eps)| {
            let nsq = math::dot(h, h);
            (nsq > 0.0).then_some((h, eps, nsq))
        })
        .collect();
    if halfspaces.iter().all(|(h, eps, _)| math::dot(h, &base) <= *eps) {
        return Projection { point: base, sweeps: 0, converged: true };
    }

    let pairs: Vec<(&[f64], f64)> = halfspaces.iter().map(|(h, eps, _)| (*h, *eps)).collect();
    let hmax = halfspaces.iter().fold(0.0f64, |m, (_, _, nsq)| m.max(math::sqrt(*nsq)));
    let dual_tol = DUAL_TOL * math::norm2(v).max(1.0) * hmax.max(1.0);
    let dual = project_dual(v, &pairs, c, |y| project_base(y, c), dual_tol);
    if dual.certified {
        let mut x = dual.point;
        shrink_into_halfspaces(&mut x, &halfspaces);
        return Projection { point: x, sweeps: dual.iterations, converged: true };
    }

    let n = v.len();
    let scale = math::norm2(v).max(1.0);
    let mut x = v.to_vec();
    let mut inc_base = vec![0.0; n];
    let mut inc_half = vec![vec![0.0; n]; halfspaces.len()];
    let mut y = vec![0.0; n];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let prev = x.clone();
        let mut inc_change = 0.0;
        for (idx, (h, eps, nsq)) in halfspaces.iter().enumerate() {
            let p = &mut inc_half[idx];
            for i in 0..n {
                y[i] = x[i] + p[i];
            }
            let excess = math::dot(h, &y) - eps;
            if excess > 0.0 {
                let t = excess / nsq;
                for i in 0..n {
                    x[i] = y[i] - t * h[i];
                }
            } else {
                x.copy_from_slice(&y);
            }
            for i in 0..n {
                let next = y[i] - x[i];
                inc_change += (next - p[i]) * (next - p[i]);
                p[i] = next;
            }
        }
        for i in 0..n {
            y[i] = x[i] + inc_base[i];
        }
        x = project_base(&y, c);
        for i in 0..n {
            let next = y[i] - x[i];
            inc_change += (next - inc_base[i]) * (next - inc_base[i]);
            inc_base[i] = next;
        }
        let moved: f64 = x.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum();
        // The iterate can stall while the corrections still drift, so both
        // have to settle.
        if math::sqrt(moved + inc_change) < MOVE_TOL * scale {
            converged = true;
            break;
        }
    }

    shrink_into_halfspaces(&mut x, &halfspaces);
    Projection { point: x, sweeps, converged }
}

/// Pulls a point of the base set toward the origin, which is feasible,
/// until every halfspace holds.
fn shrink_into_halfspaces(x: &mut [f64], halfspaces: &[(&[f64], f64, f64)]) {
    let mut shrink: f64 = 1.0;
    for (h, eps, _) in halfspaces {
        let hx = math::dot(h, x);
        if hx - eps > RESIDUAL_TOL {
            shrink = shrink.min(eps / hx);
        }
    }
    if shrink < 1.0 {
        for xi in x.iter_mut() {
            *xi *= shrink;
        }
    }
}

/// Exact projection onto the non-negativity / L1 part of the set.
fn project_base(v: &[f64], c: &ColumnConstraints) -> Vec<f64> {
    match (c.nonneg, c.l1_bound) {
        (false, None) => v.to_vec(),
        (true, None) => v.iter().map(|x| x.max(0.0)).collect(),
        (true, Some(eps)) => {
            let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
            if clamped.iter().sum::<f64>() <= eps {
                clamped
            } else {
                project_simplex(&clamped, eps)
            }
        }
        (false, Some(eps)) => {
            if math::norm1(v) <= eps {
                return v.to_vec();
            }
            let mags: Vec<f64> = v.iter().map(|x| math::abs(*x)).collect();
            let p = project_simplex(&mags, eps);
            p.iter().zip(v).map(|(m, x)| if *x < 0.0 { -m } else { *m }).collect()
        }
    }
}

/// Projection of a non-negative vector whose sum exceeds `eps` onto the
/// scaled simplex `{x >= 0, sum x = eps}`.
fn project_simplex(u: &[f64], eps: f64) -> Vec<f64> {
    if eps <= 0.0 {
        return vec![0.0; u.len()];
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - eps) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    u.iter().map(|x| (x - theta).max(0.0)).collect()
}
