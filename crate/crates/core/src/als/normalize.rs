//! Scale moves that leave both reconstructions unchanged.
//!
//! Column `r` of `A` shares its scale with core mode-1 slice `r` and with
//! column `r` of `D`; columns of `B` and `C` share theirs with the mode-2 and
//! mode-3 core slices. Moving scale along these groups changes no objective
//! term.

use alloc::vec::Vec;

use super::config::{BlockConstraints, ConstraintConfig};
use super::model::{Block, FactorModel, ModelKind};
use crate::math;
use crate::tensor::Mode;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizeReport {
    /// `(block, column)` pairs left untouched because they were zero.
    pub zero_columns: Vec<(Block, usize)>,
}

/// Multiplies column `col` of `block` by `s` and compensates elsewhere.
fn scale_column_compensated(m: &mut FactorModel, block: Block, col: usize, s: f64) {
    match block {
        Block::A => {
            m.a.scale_column(col, s);
            m.core.scale_slice(Mode::One, col, 1.0 / s);
            m.d.scale_column(col, 1.0 / s);
        }
        Block::B => {
            m.b.scale_column(col, s);
            m.core.scale_slice(Mode::Two, col, 1.0 / s);
        }
        Block::C => {
            m.c.scale_column(col, s);
            m.core.scale_slice(Mode::Three, col, 1.0 / s);
        }
        Block::D => {
            m.d.scale_column(col, s);
            m.a.scale_column(col, 1.0 / s);
            m.core.scale_slice(Mode::One, col, s);
        }
        Block::Core => unreachable!("the core has no columns"),
    }
}

/// Scales every column of `block` to unit Euclidean norm with compensation.
/// For `D` the scaling is uncompensated and only applied when
/// `cfg.normalize_d` is set.
pub fn normalize_block(m: &mut FactorModel, block: Block, cfg: &ConstraintConfig, report: &mut NormalizeReport) {
    if block == Block::Core {
        return;
    }
    if block == Block::D && !cfg.normalize_d {
        return;
    }
    let cols = m.factor(block).map_or(0, |f| f.cols());
    for col in 0..cols {
        let norm = math::norm2(&m.factor(block).expect("factor block").column(col));
        if norm == 0.0 {
            report.zero_columns.push((block, col));
            continue;
        }
        if block == Block::D {
            m.d.scale_column(col, 1.0 / norm);
        } else {
            scale_column_compensated(m, block, col, 1.0 / norm);
        }
    }
}

/// Makes a starting block satisfy its orthogonality bound by keeping only
/// the dominant entry (largest magnitude, lowest column on ties) of every
/// row, which leaves the columns with disjoint supports. Blocks that already
/// satisfy the bound, or have fewer rows than columns, are left alone.
pub fn separate_supports(m: &mut FactorModel, block: Block, cfg: &ConstraintConfig) -> bool {
    let bc = match block {
        Block::A => cfg.a,
        Block::B => cfg.b,
        Block::C => cfg.c,
        Block::D => cfg.d,
        Block::Core => return false,
    };
    let Some(eps) = bc.orth_eps else { return false };
    let Some(f) = m.factor(block) else { return false };
    let (rows, cols) = f.shape();
    if rows < cols || cols < 2 {
        return false;
    }
    let columns = f.columns();
    let feasible = (0..cols).all(|r| (r + 1..cols).all(|s| math::dot(&columns[r], &columns[s]) <= eps));
    if feasible {
        return false;
    }
    let mut out = f.clone();
    for i in 0..rows {
        let mut keep = 0;
        for r in 1..cols {
            if math::abs(f.get(i, r)) > math::abs(f.get(i, keep)) {
                keep = r;
            }
        }
        for r in 0..cols {
            if r != keep {
                out.set(i, r, 0.0);
            }
        }
    }
    match block {
        Block::A => m.a = out,
        Block::B => m.b = out,
        Block::C => m.c = out,
        Block::D => m.d = out,
        Block::Core => unreachable!(),
    }
    true
}

/// Normalizes the columns of `A`, `B` and `C` (and `D` when configured).
pub fn normalize_with_compensation(m: &FactorModel, cfg: &ConstraintConfig) -> (FactorModel, NormalizeReport) {
    let mut out = m.clone();
    let mut report = NormalizeReport::default();
    for block in [Block::A, Block::B, Block::C, Block::D] {
        normalize_block(&mut out, block, cfg, &mut report);
    }
    (out, report)
}

/// Largest per-column factors `s_r <= 1` such that scaling column `r` by
/// `s_r` satisfies the L1 and pairwise bounds of `bc`. Columns that could
/// only be fixed by `s_r = 0` keep `s_r = 1`.
fn feasible_scales(columns: &[Vec<f64>], bc: &BlockConstraints) -> Vec<f64> {
    let mut scales: Vec<f64> = columns.iter().map(|_| 1.0).collect();
    for (r, col) in columns.iter().enumerate() {
        if let Some(eps) = bc.l1_eps {
            let l1 = math::norm1(col);
            if l1 > eps && eps > 0.0 {
                scales[r] = scales[r].min(eps / l1);
            }
        }
        if let Some(eps) = bc.orth_eps {
            for (s, other) in columns.iter().enumerate() {
                if s == r {
                    continue;
                }
                let p = math::dot(col, other);
                if p > eps && eps > 0.0 {
                    scales[r] = scales[r].min(math::sqrt(eps / p));
                }
            }
        }
    }
    scales
}

/// Shrinks `block` onto its feasible set along the scale groups, so the
/// next update of that block starts from a feasible point with an unchanged
/// objective. Returns whether anything moved.
///
/// For the Tucker core the whole core is shrunk to its L1 bound and `B`
/// absorbs the inverse factor.
pub fn rescale_to_feasible(m: &mut FactorModel, block: Block, cfg: &ConstraintConfig) -> bool {
    match block {
        Block::Core => {
            if m.kind == ModelKind::Cp {
                return false;
            }
            let Some(eps) = cfg.core.l1_eps else { return false };
            let l1 = m.core.norm1();
            if !(l1 > eps && eps > 0.0) {
                return false;
            }
            let s = eps / l1;
            for v in m.core.values_mut() {
                *v *= s;
            }
            for col in 0..m.b.cols() {
                m.b.scale_column(col, 1.0 / s);
            }
            true
        }
        _ => {
            let bc = match block {
                Block::A => cfg.a,
                Block::B => cfg.b,
                Block::C => cfg.c,
                Block::D => cfg.d,
                Block::Core => unreachable!(),
            };
            let columns = m.factor(block).expect("factor block").columns();
            let scales = feasible_scales(&columns, &bc);
            let mut moved = false;
            for (col, s) in scales.into_iter().enumerate() {
                if s < 1.0 {
                    scale_column_compensated(m, block, col, s);
                    moved = true;
                }
            }
            moved
        }
    }
}
