//! Planted instances with known factors, plus recovery metrics.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::als::{objective, FactorModel, FitTrace, ModelKind, Ranks};
use crate::error::{config_err, dim_err, Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::tensor::{superdiagonal_core, Tensor3};
use crate::topics::{core_density, mean_off_diagonal, TopicReport};

const BISECTION_STEPS: usize = 200;
const MAX_EXHAUSTIVE_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PlantedConfig {
    /// `(I, J, K, F)`.
    pub dims: (usize, usize, usize, usize),
    pub ranks: Ranks,
    pub kind: ModelKind,
    /// Fraction of entries zeroed in every factor column.
    pub sparsity: f64,
    /// Relative Frobenius noise level applied to both `T` and `Y`.
    pub noise: f64,
    pub seed: u64,
    /// Give each word-mode column its own block of rows instead of random
    /// sparsity, so planted topics share no words.
    pub disjoint_words: bool,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            dims: (40, 30, 8, 10),
            ranks: Ranks::cp(3),
            kind: ModelKind::Cp,
            sparsity: 0.6,
            noise: 0.0,
            seed: 0,
            disjoint_words: false,
        }
    }
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        let (i, j, k, _) = self.dims;
        let Ranks(r1, r2, r3) = self.ranks;
        if i == 0 || j == 0 || k == 0 {
            return Err(config_err!("planted dims must be positive, got {:?}", self.dims));
        }
        if r1 == 0 || r2 == 0 || r3 == 0 {
            return Err(config_err!("planted ranks must be positive, got {:?}", self.ranks));
        }
        if self.kind == ModelKind::Cp && !self.ranks.is_cubic() {
            return Err(config_err!("a CP instance needs equal ranks, got {:?}", self.ranks));
        }
        if self.disjoint_words && r1 > i {
            return Err(config_err!("{r1} disjoint word blocks do not fit in {i} rows"));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(config_err!("sparsity must lie in [0, 1], got {}", self.sparsity));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(config_err!("noise must be finite and non-negative, got {}", self.noise));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub tensor: Tensor3,
    pub side: Matrix,
    pub truth: FactorModel,
    pub config: PlantedConfig,
}

impl PlantedInstance {
    pub fn signal(&self) -> Tensor3 {
        self.truth.reconstruct()
    }
}

fn contains_positive(v: &[f64]) -> bool {
    v.iter().any(|x| *x > 0.0)
}

/// Uniform `[0, 1)` column with `round(sparsity * rows)` entries zeroed. At
/// least one entry survives, and a column that drew only zeros gets one
/// positive entry.
fn sparse_column(rng: &mut ChaCha8Rng, rows: usize, sparsity: f64) -> Vec<f64> {
    let mut col: Vec<f64> = (0..rows).map(|_| rng.random::<f64>()).collect();
    let zeros = ((sparsity * rows as f64) + 0.5) as usize;
    let zeros = zeros.min(rows.saturating_sub(1));
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(rng);
    for &i in &idx[..zeros] {
        col[i] = 0.0;
    }
    if rows > 0 && !contains_positive(&col) {
        col[idx[rows - 1]] = 1.0;
    }
    col
}

fn normalized(mut col: Vec<f64>) -> Vec<f64> {
    let n = math::norm2(&col);
    if n > 0.0 {
        col.iter_mut().for_each(|v| *v /= n);
    }
    col
}

fn planted_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sparsity: f64) -> Matrix {
    let columns: Vec<Vec<f64>> = (0..cols).map(|_| normalized(sparse_column(rng, rows, sparsity))).collect();
    Matrix::from_columns(&columns, rows)
}

/// Rows shuffled and dealt to the columns in contiguous blocks; entries
/// drawn from `[0.1, 1)` so every owned row carries weight.
fn disjoint_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(rng);
    let mut columns = vec![vec![0.0; rows]; cols];
    for (pos, &row) in idx.iter().enumerate() {
        let owner = pos * cols / rows;
        columns[owner][row] = 0.1 + 0.9 * rng.random::<f64>();
    }
    let columns: Vec<Vec<f64>> = columns.into_iter().map(normalized).collect();
    Matrix::from_columns(&columns, rows)
}

fn planted_core(rng: &mut ChaCha8Rng, ranks: Ranks, kind: ModelKind, sparsity: f64) -> Tensor3 {
    let Ranks(r1, r2, r3) = ranks;
    match kind {
        ModelKind::Cp => {
            let w: Vec<f64> = (0..r1).map(|_| 1.0 + rng.random::<f64>()).collect();
            superdiagonal_core(&w)
        }
        ModelKind::Tucker3 => {
            let mut g = Tensor3::zeros((r1, r2, r3));
            for v in g.values_mut() {
                let keep = rng.random::<f64>() >= sparsity;
                let x = rng.random::<f64>();
                if keep {
                    *v = x;
                }
            }
            // Every slice of every mode needs mass, otherwise a factor column
            // is unidentifiable.
            for p in 0..r1.max(r2).max(r3) {
                let (i, j, k) = (p % r1, p % r2, p % r3);
                if g.get(i, j, k) == 0.0 {
                    g.set(i, j, k, 0.5 + 0.5 * rng.random::<f64>());
                }
            }
            g
        }
    }
}

/// `clamp(signal + sigma * z, 0)`.
fn clamped(signal: &[f64], z: &[f64], sigma: f64) -> Vec<f64> {
    signal.iter().zip(z).map(|(s, e)| (s + sigma * e).max(0.0)).collect()
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    math::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Adds clamped Gaussian noise whose realised Frobenius norm is exactly
/// `level * ||signal||`. The clamp makes the distance a monotone function of
/// the noise scale, which is found by bisection.
fn add_calibrated_noise(rng: &mut ChaCha8Rng, signal: &[f64], level: f64) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..signal.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let target = level * math::norm2(signal);
    if target == 0.0 {
        return Ok(signal.to_vec());
    }
    let dist = |sigma: f64| distance(&clamped(signal, &z, sigma), signal);
    let mut hi = target / math::norm2(&z).max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while dist(hi) < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Input("noise level is unreachable after clamping".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (d_lo, d_hi) = (dist(lo), dist(hi));
    let sigma = if (target - d_lo).abs() <= (d_hi - target).abs() { lo } else { hi };
    Ok(clamped(signal, &z, sigma))
}

/// Draws a planted coupled instance. Factors are non-negative with
/// unit-norm columns.
pub fn generate_planted(cfg: &PlantedConfig) -> Result<PlantedInstance> {
    cfg.validate()?;
    let (i, j, k, f) = cfg.dims;
    let Ranks(r1, r2, r3) = cfg.ranks;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = if cfg.disjoint_words {
        disjoint_factor(&mut rng, i, r1)
    } else {
        planted_factor(&mut rng, i, r1, cfg.sparsity)
    };
    let b = planted_factor(&mut rng, j, r2, cfg.sparsity);
    let c = planted_factor(&mut rng, k, r3, cfg.sparsity);
    let d = planted_factor(&mut rng, f, r1, cfg.sparsity);
    let core = planted_core(&mut rng, cfg.ranks, cfg.kind, cfg.sparsity);
    let truth = FactorModel { a, b, c, d, core, kind: cfg.kind };
    let signal = truth.reconstruct();
    let side_signal = truth.reconstruct_side();

    let t_values = add_calibrated_noise(&mut rng, signal.values(), cfg.noise)?;
    let y_values = add_calibrated_noise(&mut rng, side_signal.values(), cfg.noise)?;
    let tensor = Tensor3::new((i, j, k), t_values)?;
    let side = Matrix::new(i, f, y_values)?;
    Ok(PlantedInstance { tensor, side, truth, config: cfg.clone() })
}

fn component_similarity(est: &FactorModel, truth: &FactorModel) -> Vec<Vec<f64>> {
    let r = truth.a.cols();
    let cols = |m: &FactorModel| (m.a.columns(), m.b.columns(), m.c.columns());
    let (ea, eb, ec) = cols(est);
    let (ta, tb, tc) = cols(truth);
    (0..r)
        .map(|t| {
            (0..r)
                .map(|e| {
                    math::abs(math::cosine(&ea[e], &ta[t]))
                        * math::abs(math::cosine(&eb[e], &tb[t]))
                        * math::abs(math::cosine(&ec[e], &tc[t]))
                })
                .collect()
        })
        .collect()
}

/// Best assignment of estimated to planted components, maximising the sum
/// of similarities. Exhaustive (Heap's algorithm) up to rank 8, greedy above.
fn best_assignment(sim: &[Vec<f64>]) -> f64 {
    let r = sim.len();
    let score = |perm: &[usize]| perm.iter().enumerate().map(|(t, e)| sim[t][*e]).sum::<f64>();
    if r <= MAX_EXHAUSTIVE_RANK {
        let mut perm: Vec<usize> = (0..r).collect();
        let mut best = score(&perm);
        let mut c = vec![0usize; r];
        let mut i = 1;
        while i < r {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                best = best.max(score(&perm));
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    } else {
        let mut pairs: Vec<(f64, usize, usize)> =
            (0..r).flat_map(|t| (0..r).map(move |e| (t, e))).map(|(t, e)| (sim[t][e], t, e)).collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let (mut used_t, mut used_e) = (vec![false; r], vec![false; r]);
        let mut total = 0.0;
        for (s, t, e) in pairs {
            if !used_t[t] && !used_e[e] {
                used_t[t] = true;
                used_e[e] = true;
                total += s;
            }
        }
        total
    }
}

/// Mean over planted components of the product of `|cos|` between matched
/// `A`, `B`, `C` columns, maximised over component permutations.
pub fn factor_match_score(est: &FactorModel, truth: &FactorModel) -> Result<f64> {
    est.validate()?;
    truth.validate()?;
    if est.kind != ModelKind::Cp || truth.kind != ModelKind::Cp {
        return Err(Error::Input("factor match score needs CP models".into()));
    }
    if est.ranks() != truth.ranks() {
        return Err(dim_err!("rank {:?} does not match planted rank {:?}", est.ranks(), truth.ranks()));
    }
    if est.a.rows() != truth.a.rows() || est.b.rows() != truth.b.rows() || est.c.rows() != truth.c.rows() {
        return Err(dim_err!("factor heights differ from the planted model"));
    }
    let r = truth.a.cols();
    if r == 0 {
        return Ok(1.0);
    }
    let sim = component_similarity(est, truth);
    Ok(best_assignment(&sim) / r as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    /// `None` unless both models are CP.
    pub match_score: Option<f64>,
    pub relative_error: f64,
    pub mean_word_overlap: f64,
    pub core_density: f64,
    pub iterations: usize,
    pub wall_millis: u64,
}

/// `||T - recon|| / ||T||` (0 when both vanish).
pub fn relative_error(t: &Tensor3, model: &FactorModel) -> f64 {
    let err = crate::tensor::frobenius_error(t, &model.reconstruct()).unwrap_or(f64::INFINITY);
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        err
    } else {
        err / norm
    }
}

pub fn evaluate_run(
    instance: &PlantedInstance,
    model: &FactorModel,
    trace: &FitTrace,
    report: &TopicReport,
) -> RunMetrics {
    let match_score = if model.kind == ModelKind::Cp && instance.truth.kind == ModelKind::Cp {
        factor_match_score(model, &instance.truth).ok()
    } else {
        None
    };
    RunMetrics {
        match_score,
        relative_error: relative_error(&instance.tensor, model),
        mean_word_overlap: mean_off_diagonal(&report.cosine_overlap),
        core_density: core_density(model, Some(report.density_tol)).0,
        iterations: trace.iterations,
        wall_millis: trace.wall_millis,
    }
}

/// Coupled objective of the planted factors at weight `lambda`.
pub fn planted_objective(instance: &PlantedInstance, lambda: f64) -> Result<f64> {
    objective(&instance.tensor, &instance.side, &instance.truth, lambda)
}
