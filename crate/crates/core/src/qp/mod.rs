//! Per-column constrained subproblems.
//!
//! Every column update of the factorization minimizes `||R - a f^T||_F^2`,
//! whose Hessian is `||f||^2 I`. Its constrained optimum is therefore the
//! Euclidean projection of `R f / ||f||^2` onto the feasible set, computed by
//! [`project_feasible`]. The core update is a general convex quadratic and
//! goes through the projected-gradient solver [`solve_box_l1_qp`].
//! [`oracle::reference_qp_oracle`] is an exhaustive active-set solver used to
//! check both.

mod constraints;
mod dual;
pub mod oracle;
mod project;
mod solve;

pub use constraints::ColumnConstraints;
pub use oracle::reference_qp_oracle;
pub use project::{project_feasible, project_feasible_report, Projection, MAX_SWEEPS};
pub use solve::{
    default_tol, quadratic_objective, solve_box_l1_qp, solve_rank1_column, solve_rank1_from_moments,
    SolveReport, DEGENERATE_NORM_SQ,
};
