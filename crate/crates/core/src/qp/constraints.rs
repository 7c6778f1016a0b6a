use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::math;

/// Feasible set of one column: optional non-negativity, an L1 bound and
/// halfspaces `c_j^T x <= orth_bound` against each fixed column `c_j`.
///
/// The set always contains the origin, since bounds are non-negative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnConstraints {
    pub nonneg: bool,
    pub l1_bound: Option<f64>,
    pub orth_bound: Option<f64>,
    pub fixed_columns: Vec<Vec<f64>>,
}

impl ColumnConstraints {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn nonneg() -> Self {
        Self { nonneg: true, ..Self::default() }
    }

    pub fn with_l1(mut self, eps: f64) -> Self {
        self.l1_bound = Some(eps);
        self
    }

    pub fn with_orth(mut self, eps: f64, fixed_columns: Vec<Vec<f64>>) -> Self {
        self.orth_bound = Some(eps);
        self.fixed_columns = fixed_columns;
        self
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        for (name, b) in [("l1", self.l1_bound), ("orthogonality", self.orth_bound)] {
            if let Some(eps) = b {
                if !eps.is_finite() || eps < 0.0 {
                    return Err(config_err!("{name} bound must be finite and >= 0, got {eps}"));
                }
            }
        }
        if self.orth_bound.is_some() && self.fixed_columns.iter().any(|c| c.len() != len) {
            return Err(config_err!("fixed columns must have length {len}"));
        }
        Ok(())
    }

    /// Whether any constraint is configured.
    pub fn is_active(&self) -> bool {
        self.nonneg || self.l1_bound.is_some() || (self.orth_bound.is_some() && !self.fixed_columns.is_empty())
    }

    pub(crate) fn halfspaces(&self) -> impl Iterator<Item = (&[f64], f64)> {
        let eps = self.orth_bound;
        self.fixed_columns
            .iter()
            .filter(move |_| eps.is_some())
            .map(move |c| (c.as_slice(), eps.unwrap_or(0.0)))
    }

    /// Largest violation over all configured constraints (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        if self.nonneg {
            for v in x {
                worst = worst.max(-v);
            }
        }
        if let Some(eps) = self.l1_bound {
            worst = worst.max(math::norm1(x) - eps);
        }
        for (c, eps) in self.halfspaces() {
            worst = worst.max(math::dot(c, x) - eps);
        }
        worst
    }
}
