//! Comparator decompositions expressed as restricted runs of the same
//! engine, so differences against the constrained model come only from the
//! constraint system.

use crate::als::{fit, BlockConstraints, ConstraintConfig, CoreConstraints, FactorModel, FitConfig, FitTrace, ModelKind, Ranks};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::tensor::Tensor3;

/// Configuration of the non-negative PARAFAC baseline.
pub fn parafac_ns_config() -> ConstraintConfig {
    ConstraintConfig {
        a: BlockConstraints::nonneg(),
        b: BlockConstraints::nonneg(),
        c: BlockConstraints::nonneg(),
        d: BlockConstraints::nonneg(),
        core: CoreConstraints { nonneg: true, l1_eps: None },
        coupling_weight: 0.0,
        normalize_d: false,
    }
}

/// Configuration of the sparse non-negative Tucker3 baseline.
pub fn tucker3_ns_config(core_l1: Option<f64>) -> ConstraintConfig {
    ConstraintConfig { core: CoreConstraints { nonneg: true, l1_eps: core_l1 }, ..parafac_ns_config() }
}

/// Non-negative CP fit of `t` alone (PARAFAC-NS).
pub fn parafac_ns_fit(t: &Tensor3, rank: usize, fcfg: &FitConfig) -> Result<(FactorModel, FitTrace)> {
    let y = Matrix::zeros(t.dims().0, 0);
    fit(t, &y, Ranks::cp(rank), ModelKind::Cp, &parafac_ns_config(), fcfg)
}

/// Non-negative Tucker3 fit of `t` alone with an optional core L1 bound
/// (TUCKER3-NS).
pub fn tucker3_ns_fit(
    t: &Tensor3,
    ranks: Ranks,
    core_l1: Option<f64>,
    fcfg: &FitConfig,
) -> Result<(FactorModel, FitTrace)> {
    let y = Matrix::zeros(t.dims().0, 0);
    fit(t, &y, ranks, ModelKind::Tucker3, &tucker3_ns_config(core_l1), fcfg)
}
