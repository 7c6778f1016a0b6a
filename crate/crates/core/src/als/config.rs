use crate::error::{config_err, Result};
use crate::qp::ColumnConstraints;
use alloc::vec::Vec;

/// Constraints applied to every column of one factor matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BlockConstraints {
    pub nonneg: bool,
    /// Per-column bound `||x_r||_1 <= eps`.
    pub l1_eps: Option<f64>,
    /// Pairwise bound `x_r^T x_s <= eps` for `r != s`.
    pub orth_eps: Option<f64>,
}

impl Default for BlockConstraints {
    fn default() -> Self {
        Self::nonneg()
    }
}

impl BlockConstraints {
    pub const fn free() -> Self {
        Self { nonneg: false, l1_eps: None, orth_eps: None }
    }

    pub const fn nonneg() -> Self {
        Self { nonneg: true, l1_eps: None, orth_eps: None }
    }

    /// Non-negativity with the same `eps` bounding both column L1 norms and
    /// pairwise inner products.
    pub const fn bounded(eps: f64) -> Self {
        Self { nonneg: true, l1_eps: Some(eps), orth_eps: Some(eps) }
    }

    /// Non-negativity with pairwise inner products bounded by `eps`.
    pub const fn orthogonal(eps: f64) -> Self {
        Self { nonneg: true, l1_eps: None, orth_eps: Some(eps) }
    }

    pub fn column(&self, fixed_columns: Vec<Vec<f64>>) -> ColumnConstraints {
        ColumnConstraints {
            nonneg: self.nonneg,
            l1_bound: self.l1_eps,
            orth_bound: self.orth_eps,
            fixed_columns: if self.orth_eps.is_some() { fixed_columns } else { Vec::new() },
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        for (what, eps) in [("l1_eps", self.l1_eps), ("orth_eps", self.orth_eps)] {
            if let Some(e) = eps {
                if !e.is_finite() || e < 0.0 {
                    return Err(config_err!("block {name}: {what} must be finite and >= 0, got {e}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CoreConstraints {
    pub nonneg: bool,
    /// Bound on the L1 norm of the whole core.
    pub l1_eps: Option<f64>,
}

impl Default for CoreConstraints {
    fn default() -> Self {
        Self { nonneg: true, l1_eps: None }
    }
}

impl CoreConstraints {
    pub fn as_column(&self) -> ColumnConstraints {
        ColumnConstraints { nonneg: self.nonneg, l1_bound: self.l1_eps, ..ColumnConstraints::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ConstraintConfig {
    pub a: BlockConstraints,
    pub b: BlockConstraints,
    pub c: BlockConstraints,
    pub d: BlockConstraints,
    pub core: CoreConstraints,
    /// Weight `lambda` of the side-matrix fit.
    pub coupling_weight: f64,
    /// Unit-normalize `D` after its update without compensation. Off by
    /// default since it breaks monotone descent.
    pub normalize_d: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            a: BlockConstraints::nonneg(),
            b: BlockConstraints::nonneg(),
            c: BlockConstraints::nonneg(),
            d: BlockConstraints::nonneg(),
            core: CoreConstraints::default(),
            coupling_weight: 1.0,
            normalize_d: false,
        }
    }
}

impl ConstraintConfig {
    /// Non-negativity everywhere, no bounds.
    pub fn nonneg_only(coupling_weight: f64) -> Self {
        Self { coupling_weight, ..Self::default() }
    }

    /// The bounds used for the physics corpus: `eps_A = 0.05`, `eps_B = 0.6`,
    /// `eps_C = 0.2`, `eps_D = 0.2`, each bounding both column L1 norms and
    /// pairwise inner products.
    pub fn physics() -> Self {
        Self {
            a: BlockConstraints::bounded(0.05),
            b: BlockConstraints::bounded(0.6),
            c: BlockConstraints::bounded(0.2),
            d: BlockConstraints::bounded(0.2),
            ..Self::default()
        }
    }

    /// The same configuration with every L1 and orthogonality bound removed.
    pub fn relaxed(&self) -> Self {
        let strip = |b: BlockConstraints| BlockConstraints { nonneg: b.nonneg, l1_eps: None, orth_eps: None };
        Self {
            a: strip(self.a),
            b: strip(self.b),
            c: strip(self.c),
            d: strip(self.d),
            core: CoreConstraints { nonneg: self.core.nonneg, l1_eps: None },
            ..*self
        }
    }

    /// The physics bounds applied to pairwise inner products only.
    pub fn physics_orthogonal() -> Self {
        Self {
            a: BlockConstraints::orthogonal(0.05),
            b: BlockConstraints::orthogonal(0.6),
            c: BlockConstraints::orthogonal(0.2),
            d: BlockConstraints::orthogonal(0.2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate("A")?;
        self.b.validate("B")?;
        self.c.validate("C")?;
        self.d.validate("D")?;
        if let Some(e) = self.core.l1_eps {
            if !e.is_finite() || e < 0.0 {
                return Err(config_err!("core l1_eps must be finite and >= 0, got {e}"));
            }
        }
        if !self.coupling_weight.is_finite() || self.coupling_weight < 0.0 {
            return Err(config_err!("coupling weight must be finite and >= 0, got {}", self.coupling_weight));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FitConfig {
    pub max_iters: usize,
    /// Stop when the relative objective change of a sweep falls below this.
    pub rel_tol: f64,
    pub seed: u64,
    /// Keep per-sweep objective, violation and timing entries.
    pub record_trace: bool,
    /// Skip the core update even for Tucker3 models.
    pub freeze_core: bool,
    /// Rescale the initial core and `D` so the starting reconstructions match
    /// the data norms.
    pub match_scale: bool,
    /// Guarantee a non-increasing objective. When off, every block update
    /// starts from the normalized factors, so L1 and orthogonality bounds
    /// hold at unit column scale but the objective may rise.
    pub strict_descent: bool,
    /// Sweeps run with only sign constraints before the bounded fit starts.
    pub warmup_sweeps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-6,
            seed: 0,
            record_trace: true,
            freeze_core: false,
            match_scale: true,
            strict_descent: true,
            warmup_sweeps: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(config_err!("max_iters must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(config_err!("rel_tol must be > 0, got {}", self.rel_tol));
        }
        Ok(())
    }
}
