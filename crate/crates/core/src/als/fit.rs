use alloc::vec::Vec;

use super::config::{ConstraintConfig, FitConfig};
use super::model::{init_factors, Block, FactorModel, ModelKind, Ranks};
use super::normalize::{normalize_block, rescale_to_feasible, separate_supports, NormalizeReport};
use super::update::{update_core, update_factor_a, update_factor_b, update_factor_c, update_factor_d, BlockUpdate};
use crate::error::{dim_err, Result};
use crate::math;
use crate::matrix::{frobenius_error as matrix_error, Matrix};
use crate::tensor::{frobenius_error, Tensor3};

/// Largest constraint violation of each block right after its update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockViolations {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub core: f64,
}

impl BlockViolations {
    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c).max(self.d).max(self.core)
    }

    fn merge(&mut self, other: &BlockViolations) {
        self.a = self.a.max(other.a);
        self.b = self.b.max(other.b);
        self.c = self.c.max(other.c);
        self.d = self.d.max(other.d);
        self.core = self.core.max(other.core);
    }
}

/// A column that could not be updated because its design was zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateEvent {
    pub iteration: usize,
    pub block: Block,
    pub column: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Objective before the first sweep followed by one entry per sweep.
    pub objectives: Vec<f64>,
    pub violations: Vec<BlockViolations>,
    /// Elapsed milliseconds at the end of each sweep.
    pub millis: Vec<u64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: Vec<DegenerateEvent>,
    /// Zero columns skipped by normalization.
    pub zero_columns: Vec<DegenerateEvent>,
    /// Core solves that hit their iteration cap.
    pub unconverged_core_solves: usize,
    pub wall_millis: u64,
    /// Objectives of the relaxed warm-up sweeps, if any.
    pub warmup_objectives: Vec<f64>,
}

impl FitTrace {
    pub fn final_objective(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(BlockViolations::max).fold(0.0, f64::max)
    }
}

/// `||t - [[G; A, B, C]]||^2 + lambda ||y - A D^T||^2`.
pub fn objective(t: &Tensor3, y: &Matrix, m: &FactorModel, lambda: f64) -> Result<f64> {
    let recon = m.reconstruct();
    let et = frobenius_error(t, &recon)?;
    let mut total = et * et;
    if lambda != 0.0 {
        let ey = matrix_error(y, &m.reconstruct_side())?;
        total += lambda * ey * ey;
    }
    Ok(total)
}

/// Scales the core and `D` so the model reconstructions have the same
/// Frobenius norms as `t` and `y`.
pub fn match_initial_scale(t: &Tensor3, y: &Matrix, m: &mut FactorModel) {
    let rn = m.reconstruct().frobenius_norm();
    let tn = t.frobenius_norm();
    if rn > 0.0 && tn > 0.0 {
        let s = tn / rn;
        for v in m.core.values_mut() {
            *v *= s;
        }
    }
    if y.cols() > 0 {
        let sn = m.reconstruct_side().frobenius_norm();
        let yn = y.frobenius_norm();
        if sn > 0.0 && yn > 0.0 {
            let s = yn / sn;
            for col in 0..m.d.cols() {
                m.d.scale_column(col, s);
            }
        }
    }
}

/// Fits a fresh model initialized from `fcfg.seed`.
pub fn fit(
    t: &Tensor3,
    y: &Matrix,
    ranks: Ranks,
    kind: ModelKind,
    ccfg: &ConstraintConfig,
    fcfg: &FitConfig,
) -> Result<(FactorModel, FitTrace)> {
    let (i, j, k) = t.dims();
    if y.rows() != i {
        return Err(dim_err!("side matrix has {} rows, tensor first mode has {i}", y.rows()));
    }
    let model = init_factors((i, j, k, y.cols()), ranks, kind, fcfg.seed)?;
    fit_from_model(t, y, model, ccfg, fcfg)
}

/// Fits starting from `model`.
pub fn fit_from_model(
    t: &Tensor3,
    y: &Matrix,
    model: FactorModel,
    ccfg: &ConstraintConfig,
    fcfg: &FitConfig,
) -> Result<(FactorModel, FitTrace)> {
    fit_with_clock(t, y, model, ccfg, fcfg, &mut || 0)
}

/// Outcome of one accepted block update.
struct Step {
    model: FactorModel,
    violation: f64,
    degenerate: Vec<usize>,
    core_converged: bool,
}

fn apply_update(t: &Tensor3, y: &Matrix, mut m: FactorModel, block: Block, ccfg: &ConstraintConfig) -> Result<Step> {
    let upd: BlockUpdate = match block {
        Block::A => update_factor_a(t, y, &m, ccfg)?,
        Block::B => update_factor_b(t, &m, ccfg)?,
        Block::C => update_factor_c(t, &m, ccfg)?,
        Block::D => update_factor_d(y, &m, ccfg)?,
        Block::Core => {
            let upd = update_core(t, &m, ccfg)?;
            m.core = upd.core;
            return Ok(Step {
                model: m,
                violation: upd.report.feasibility_violation,
                degenerate: Vec::new(),
                core_converged: upd.report.converged,
            });
        }
    };
    match block {
        Block::A => m.a = upd.factor,
        Block::B => m.b = upd.factor,
        Block::C => m.c = upd.factor,
        Block::D => m.d = upd.factor,
        Block::Core => unreachable!(),
    }
    Ok(Step { model: m, violation: upd.violation, degenerate: upd.degenerate_columns, core_converged: true })
}

/// Updates one block without increasing the objective: the block is first
/// shrunk onto its bounds with compensation, so the solve starts from a
/// feasible point with an unchanged objective.
fn step_block(t: &Tensor3, y: &Matrix, mut m: FactorModel, block: Block, ccfg: &ConstraintConfig) -> Result<Step> {
    rescale_to_feasible(&mut m, block, ccfg);
    apply_update(t, y, m, block, ccfg)
}

/// [`fit_from_model`] with a millisecond clock used for the trace timings.
pub fn fit_with_clock(
    t: &Tensor3,
    y: &Matrix,
    model: FactorModel,
    ccfg: &ConstraintConfig,
    fcfg: &FitConfig,
    clock: &mut dyn FnMut() -> u64,
) -> Result<(FactorModel, FitTrace)> {
    ccfg.validate()?;
    fcfg.validate()?;
    model.validate()?;
    let (i, j, k, f) = model.dims();
    if t.dims() != (i, j, k) {
        return Err(dim_err!("tensor {:?} does not match model dims ({i}, {j}, {k})", t.dims()));
    }
    if y.shape() != (i, f) {
        return Err(dim_err!("side matrix {:?} does not match ({i}, {f})", y.shape()));
    }
    if t.is_empty() {
        return Err(dim_err!("cannot fit an empty tensor {:?}", t.dims()));
    }

    let start = clock();
    let mut m = model;
    if fcfg.match_scale {
        match_initial_scale(t, y, &mut m);
    }
    let mut warmup_objectives = Vec::new();
    if fcfg.warmup_sweeps > 0 {
        let relaxed = ccfg.relaxed();
        let wcfg = FitConfig { max_iters: fcfg.warmup_sweeps, record_trace: true, ..*fcfg };
        let mut warm = FitTrace::default();
        m = run_sweeps(t, y, m, &relaxed, &wcfg, true, &mut warm, clock, start)?;
        warmup_objectives = warm.objectives;
        // Round the warm model onto disjoint supports wherever an
        // orthogonality bound applies.
        for block in [Block::A, Block::B, Block::C, Block::D] {
            separate_supports(&mut m, block, ccfg);
        }
    }
    let mut trace = FitTrace::default();
    m = run_sweeps(t, y, m, ccfg, fcfg, fcfg.strict_descent, &mut trace, clock, start)?;
    trace.warmup_objectives = warmup_objectives;
    Ok((m, trace))
}

/// Objectives below this fraction of the data energy are round-off.
const EXACT_FIT_FLOOR: f64 = (64.0 * f64::EPSILON) * (64.0 * f64::EPSILON);

fn run_sweeps(
    t: &Tensor3,
    y: &Matrix,
    mut m: FactorModel,
    ccfg: &ConstraintConfig,
    fcfg: &FitConfig,
    strict: bool,
    trace: &mut FitTrace,
    clock: &mut dyn FnMut() -> u64,
    start: u64,
) -> Result<FactorModel> {
    let lambda = ccfg.coupling_weight;
    let blocks: &[Block] = if m.kind == ModelKind::Tucker3 && !fcfg.freeze_core {
        &[Block::A, Block::B, Block::C, Block::D, Block::Core]
    } else {
        &[Block::A, Block::B, Block::C, Block::D]
    };

    let initial = objective(t, y, &m, lambda)?;
    trace.objectives.push(initial);
    let tn = t.frobenius_norm();
    let yn = if lambda != 0.0 { y.frobenius_norm() } else { 0.0 };
    let floor = EXACT_FIT_FLOOR * (tn * tn + lambda * yn * yn);
    let mut prev = initial;
    let mut worst = BlockViolations::default();
    let mut norm_report = NormalizeReport::default();

    for it in 1..=fcfg.max_iters {
        let mut viol = BlockViolations::default();
        for &block in blocks {
            let step = if strict { step_block(t, y, m, block, ccfg)? } else { apply_update(t, y, m, block, ccfg)? };
            m = step.model;
            trace.degenerate.extend(step.degenerate.iter().map(|&column| DegenerateEvent { iteration: it, block, column }));
            match block {
                Block::A => viol.a = step.violation,
                Block::B => viol.b = step.violation,
                Block::C => viol.c = step.violation,
                Block::D => viol.d = step.violation,
                Block::Core => {
                    viol.core = step.violation;
                    if !step.core_converged {
                        trace.unconverged_core_solves += 1;
                    }
                }
            }
            normalize_block(&mut m, block, ccfg, &mut norm_report);
        }

        let obj = objective(t, y, &m, lambda)?;
        let now = clock().saturating_sub(start);
        trace.zero_columns.extend(
            norm_report.zero_columns.drain(..).map(|(block, column)| DegenerateEvent { iteration: it, block, column }),
        );
        if fcfg.record_trace {
            trace.objectives.push(obj);
            trace.violations.push(viol);
            trace.millis.push(now);
        }
        worst.merge(&viol);
        trace.iterations = it;
        trace.wall_millis = now;

        let change = math::abs(prev - obj);
        let converged = obj <= floor || change <= fcfg.rel_tol * prev.max(f64::MIN_POSITIVE);
        prev = obj;
        if converged {
            trace.converged = true;
            break;
        }
    }
    if !fcfg.record_trace {
        trace.objectives.push(prev);
        trace.violations.push(worst);
        trace.millis.push(trace.wall_millis);
    }
    Ok(m)
}
