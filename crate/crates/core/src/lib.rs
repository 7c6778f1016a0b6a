//! Numerical core for constrained coupled matrix-tensor factorization.
//!
//! A 3-mode tensor `T` (I x J x K) and a side matrix `Y` (I x F) share their
//! first mode. The engine fits either a Tucker3 model
//! `T ~ G x1 A x2 B x3 C` or its CP special case (superdiagonal `G`), jointly
//! with `Y ~ A D^T`, under per-column non-negativity, L1 and pairwise
//! orthogonality bounds. Each column subproblem has an isotropic Hessian and
//! is solved exactly as a Euclidean projection.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, ingestion from
//! JSON-lines and the command-line interface live in the `concmtf` crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;

pub mod als;
pub mod baselines;
pub mod corpus;
pub mod matrix;
pub mod qp;
pub mod synth;
pub mod tensor;
pub mod topics;

pub use als::{
    fit, fit_from_model, init_factors, objective, BlockConstraints, ConstraintConfig, CoreConstraints,
    FactorModel, FitConfig, FitTrace, ModelKind, Ranks,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tensor::{CooTensor, Tensor3};
