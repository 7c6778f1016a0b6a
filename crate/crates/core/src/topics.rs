//! Topic reports: 2-means thresholding of word-mode columns, per-component
//! time and difficulty profiles, and overlap / core-density metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::als::{FactorModel, ModelKind};
use crate::error::{dim_err, Error, Result};
use crate::math;
use crate::matrix::Matrix;

const LLOYD_MAX_ITERS: usize = 100;

/// Split of a vector into a low and a high cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    /// Smallest value in the high cluster.
    pub threshold: f64,
    /// Indices of the high cluster, ascending.
    pub high: Vec<usize>,
}

/// One-dimensional 2-means (Lloyd) with centroids started at the minimum and
/// the maximum. A value joins the high cluster only when strictly closer to
/// the high centroid. When every value is equal all indices are high.
pub fn kmeans2_1d(values: &[f64]) -> Result<TwoMeans> {
    if values.is_empty() {
        return Err(Error::Input("2-means needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("2-means needs finite values".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(TwoMeans { threshold: lo, high: (0..values.len()).collect() });
    }
    let (mut c_lo, mut c_hi) = (lo, hi);
    let mut assign: Vec<bool> = vec![false; values.len()];
    for _ in 0..LLOYD_MAX_ITERS {
        let next: Vec<bool> = values.iter().map(|v| math::abs(v - c_hi) < math::abs(v - c_lo)).collect();
        let changed = next != assign;
        assign = next;
        let (mut s_lo, mut n_lo, mut s_hi, mut n_hi) = (0.0, 0usize, 0.0, 0usize);
        for (v, h) in values.iter().zip(&assign) {
            if *h {
                s_hi += v;
                n_hi += 1;
            } else {
                s_lo += v;
                n_lo += 1;
            }
        }
        // Both clusters stay non-empty in 1-D: the minimum is never strictly
        // closer to a centroid above the other, and vice versa for the maximum.
        if n_lo > 0 {
            c_lo = s_lo / n_lo as f64;
        }
        if n_hi > 0 {
            c_hi = s_hi / n_hi as f64;
        }
        if !changed {
            break;
        }
    }
    let high: Vec<usize> = (0..values.len()).filter(|i| assign[*i]).collect();
    let threshold = high.iter().map(|i| values[*i]).fold(f64::INFINITY, f64::min);
    Ok(TwoMeans { threshold, high })
}

/// Retained entries of a thresholded column.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholded {
    pub threshold: f64,
    /// `(index, weight)` sorted by weight descending, ties by index.
    pub support: Vec<(usize, f64)>,
}

/// Zeroes every entry below the 2-means threshold of `column`.
pub fn threshold_component(column: &[f64]) -> Result<Thresholded> {
    let split = kmeans2_1d(column)?;
    let mut support: Vec<(usize, f64)> =
        column.iter().copied().enumerate().filter(|(_, v)| *v >= split.threshold).collect();
    support.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(Thresholded { threshold: split.threshold, support })
}

/// Dense column with the entries outside `support` zeroed.
pub fn apply_support(len: usize, support: &[(usize, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for &(i, w) in support {
        out[i] = w;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicComponent {
    pub index: usize,
    pub threshold: f64,
    pub word_support: Vec<(usize, f64)>,
    pub time_profile: Vec<f64>,
    pub difficulty_profile: Vec<f64>,
    pub tag_loadings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    pub components: Vec<TopicComponent>,
    /// Cosine similarity of the raw word-mode columns.
    pub cosine_overlap: Matrix,
    /// Jaccard index of the thresholded word supports.
    pub support_jaccard: Matrix,
    pub core_density: f64,
    pub density_tol: f64,
}

impl TopicReport {
    /// Mean of the off-diagonal cosine overlaps (0 for a single component).
    pub fn mean_pairwise_overlap(&self) -> f64 {
        mean_off_diagonal(&self.cosine_overlap)
    }
}

pub(crate) fn mean_off_diagonal(m: &Matrix) -> f64 {
    let r = m.rows();
    if r < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..r {
        for j in i + 1..r {
            sum += m.get(i, j);
        }
    }
    sum / (r * (r - 1) / 2) as f64
}

/// Fraction of core entries with magnitude above `tol`; `tol` defaults to
/// `1e-6` times the largest magnitude. Returns `(density, tol)`.
pub fn core_density(model: &FactorModel, tol: Option<f64>) -> (f64, f64) {
    let max = model.core.max_abs();
    let tol = tol.unwrap_or(1e-6 * max);
    let n = model.core.len();
    if n == 0 || max == 0.0 {
        return (0.0, tol);
    }
    let count = model.core.values().iter().filter(|v| math::abs(**v) > tol).count();
    (count as f64 / n as f64, tol)
}

fn matrix_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    m.mat_vec(x).expect("profile shapes follow the model")
}

/// One component per word-mode column. CP components use columns `r` of
/// `B`, `C`, `D`; Tucker3 components use `B g_time` and `C g_level`, where
/// `g_time[q] = sum_s G[r, q, s]` and `g_level[s] = sum_q G[r, q, s]`.
pub fn build_report(model: &FactorModel, vocab_len: usize, density_tol: Option<f64>) -> Result<TopicReport> {
    model.validate()?;
    if vocab_len != model.a.rows() {
        return Err(dim_err!("vocabulary has {vocab_len} words, model has {} rows", model.a.rows()));
    }
    let (r1, r2, r3) = model.core.dims();
    let word_cols = model.a.columns();
    let mut components = Vec::with_capacity(r1);
    let mut supports = Vec::with_capacity(r1);
    for (r, col) in word_cols.iter().enumerate() {
        let th = threshold_component(col)?;
        let (time_profile, difficulty_profile) = match model.kind {
            ModelKind::Cp => (model.b.column(r), model.c.column(r)),
            ModelKind::Tucker3 => {
                let mut g_time = vec![0.0; r2];
                let mut g_level = vec![0.0; r3];
                for s in 0..r3 {
                    for q in 0..r2 {
                        let g = model.core.get(r, q, s);
                        g_time[q] += g;
                        g_level[s] += g;
                    }
                }
                (matrix_vec(&model.b, &g_time), matrix_vec(&model.c, &g_level))
            }
        };
        supports.push(th.support.iter().map(|(i, _)| *i).collect::<Vec<_>>());
        components.push(TopicComponent {
            index: r,
            threshold: th.threshold,
            word_support: th.support,
            time_profile,
            difficulty_profile,
            tag_loadings: model.d.column(r),
        });
    }

    let mut cosine_overlap = Matrix::zeros(r1, r1);
    let mut support_jaccard = Matrix::zeros(r1, r1);
    for i in 0..r1 {
        for j in 0..r1 {
            let cos = if i == j {
                if math::norm2(&word_cols[i]) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                math::cosine(&word_cols[i], &word_cols[j])
            };
            cosine_overlap.set(i, j, cos);
            support_jaccard.set(i, j, jaccard(&supports[i], &supports[j]));
        }
    }
    let (density, tol) = core_density(model, density_tol);
    Ok(TopicReport { components, cosine_overlap, support_jaccard, core_density: density, density_tol: tol })
}

/// Jaccard index of two ascending-or-unsorted index sets.
fn jaccard(x: &[usize], y: &[usize]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable();
    ys.sort_unstable();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < xs.len() && j < ys.len() {
        match xs[i].cmp(&ys[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = xs.len() + ys.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::superdiagonal_core;

    #[test]
    fn two_point_clusters() {
        let s = kmeans2_1d(&[0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.threshold, 1.0);
        assert_eq!(s.high, vec![3, 4]);
    }

    #[test]
    fn singleton_and_constant() {
        assert_eq!(kmeans2_1d(&[5.0]).unwrap(), TwoMeans { threshold: 5.0, high: vec![0] });
        assert_eq!(kmeans2_1d(&[2.0; 4]).unwrap(), TwoMeans { threshold: 2.0, high: vec![0, 1, 2, 3] });
        assert!(kmeans2_1d(&[]).is_err());
    }

    #[test]
    fn threshold_word_column() {
        let th = threshold_component(&[0.9, 0.05, 0.0, 0.8]).unwrap();
        assert_eq!(th.support, vec![(0, 0.9), (3, 0.8)]);
        assert_eq!(th.threshold, 0.8);
    }

    #[test]
    fn all_zero_column_keeps_everything() {
        let th = threshold_component(&[0.0; 3]).unwrap();
        assert_eq!(th.threshold, 0.0);
        assert_eq!(th.support, vec![(0, 0.0), (1, 0.0), (2, 0.0)]);
    }

    fn cp_model(a: Matrix) -> FactorModel {
        let r = a.cols();
        FactorModel {
            b: Matrix::identity(r),
            c: Matrix::identity(r),
            d: Matrix::zeros(0, r),
            core: superdiagonal_core(&vec![1.0; r]),
            kind: ModelKind::Cp,
            a,
        }
    }

    #[test]
    fn disjoint_word_factors_do_not_overlap() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.5, 0.0], &[0.0, 0.7], &[0.0, 0.2]]);
        let rep = build_report(&cp_model(a), 4, None).unwrap();
        assert_eq!(rep.support_jaccard.get(0, 1), 0.0);
        assert_eq!(rep.cosine_overlap.get(0, 1), 0.0);
        assert_eq!(rep.cosine_overlap.get(1, 1), 1.0);
    }

    #[test]
    fn duplicated_components_overlap_fully() {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[0.5, 0.5], &[0.0, 0.0]]);
        let rep = build_report(&cp_model(a), 3, None).unwrap();
        assert!((rep.cosine_overlap.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(rep.support_jaccard.get(0, 1), 1.0);
        assert!((rep.mean_pairwise_overlap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn superdiagonal_density() {
        let m = cp_model(Matrix::identity(4));
        let rep = build_report(&m, 4, None).unwrap();
        assert_eq!(rep.core_density, 4.0 / 64.0);
    }

    #[test]
    fn vocabulary_mismatch() {
        assert!(build_report(&cp_model(Matrix::identity(2)), 3, None).is_err());
    }

    #[test]
    fn tucker_profiles_contract_core() {
        // A: 2x2 identity, B: 3x2, C: 2x1, core 2x2x1.
        let core = crate::tensor::Tensor3::new((2, 2, 1), vec![1.0, 0.0, 2.0, 3.0]).unwrap();
        let m = FactorModel {
            a: Matrix::identity(2),
            b: Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]),
            c: Matrix::from_rows(&[&[2.0], &[1.0]]),
            d: Matrix::zeros(0, 2),
            core,
            kind: ModelKind::Tucker3,
        };
        let rep = build_report(&m, 2, None).unwrap();
        // component 0: g_time = [G(0,0,0), G(0,1,0)] = [1, 2]; g_level = [3]
        assert_eq!(rep.components[0].time_profile, vec![1.0, 2.0, 3.0]);
        assert_eq!(rep.components[0].difficulty_profile, vec![6.0, 3.0]);
        // component 1: g_time = [0, 3]; g_level = [3]
        assert_eq!(rep.components[1].time_profile, vec![0.0, 3.0, 3.0]);
    }
}
