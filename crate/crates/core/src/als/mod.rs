//! Constrained coupled ALS: block-coordinate updates of `A` (shared with the
//! side matrix), `B`, `C`, `D` and the core, with compensated column
//! normalization.

mod config;
mod fit;
mod model;
mod normalize;
mod update;

pub use config::{BlockConstraints, ConstraintConfig, CoreConstraints, FitConfig};
pub use fit::{fit, fit_from_model, fit_with_clock, match_initial_scale, objective, BlockViolations, DegenerateEvent, FitTrace};
pub use model::{init_factors, Block, FactorModel, ModelKind, Ranks};
pub use normalize::{normalize_block, normalize_with_compensation, rescale_to_feasible, separate_supports, NormalizeReport};
pub use update::{
    block_violation, core_gram, core_linear_term, update_core, update_factor_a, update_factor_b, update_factor_c,
    update_factor_d, BlockUpdate, CoreUpdate,
};
