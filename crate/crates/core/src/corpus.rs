//! Construction of the (word, week, post-number bucket) count tensor and
//! the (word, tag) matrix from a tokenised post log.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::tensor::CooTensor;

pub const SECONDS_PER_WEEK: i64 = 604_800;
/// 1970-01-05T00:00:00Z, the first Monday after the Unix epoch.
const FIRST_MONDAY: i64 = 4 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PostRecord {
    #[cfg_attr(feature = "serde", serde(rename = "user"))]
    pub user_id: String,
    /// Seconds since the Unix epoch.
    #[cfg_attr(feature = "serde", serde(rename = "ts"))]
    pub timestamp: i64,
    pub tokens: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, count)` pairs in index order.
    pub fn from_entries(entries: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (w, c)) in entries.into_iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Input(alloc::format!("duplicate vocabulary word {w:?}")));
            }
            words.push(w);
            counts.push(c);
        }
        Ok(Vocabulary { words, counts, index, min_count })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Words occurring strictly more than `min_count` times, ordered by
/// frequency descending then lexicographically.
pub fn build_vocabulary(posts: &[PostRecord], min_count: u64) -> Vocabulary {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for p in posts {
        for t in &p.tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, u64)> =
        freq.into_iter().filter(|(_, c)| *c > min_count).map(|(w, c)| (String::from(w), c)).collect();
    entries.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    Vocabulary::from_entries(entries, min_count).expect("word keys are unique")
}

/// Per-user post ordinals (1-based), in input order. Each user's posts are
/// ranked by timestamp, ties by input position.
pub fn assign_post_numbers(posts: &[PostRecord]) -> Vec<u64> {
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in posts.iter().enumerate() {
        by_user.entry(p.user_id.as_str()).or_default().push(i);
    }
    let mut numbers = vec![0u64; posts.len()];
    for idx in by_user.values_mut() {
        idx.sort_by_key(|&i| (posts[i].timestamp, i));
        for (n, &i) in idx.iter().enumerate() {
            numbers[i] = n as u64 + 1;
        }
    }
    numbers
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum BucketScheme {
    /// `min(floor(log_base p), num_buckets - 1)`.
    Log {
        num_buckets: usize,
        #[cfg_attr(feature = "serde", serde(default = "default_log_base"))]
        base: f64,
    },
    /// `min(p, cap) - 1`.
    LinearCapped { cap: usize },
}

pub fn default_log_base() -> f64 {
    core::f64::consts::E
}

impl Default for BucketScheme {
    fn default() -> Self {
        BucketScheme::Log { num_buckets: 9, base: default_log_base() }
    }
}

impl BucketScheme {
    pub fn natural_log(num_buckets: usize) -> Self {
        BucketScheme::Log { num_buckets, base: default_log_base() }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BucketScheme::Log { num_buckets, base } => {
                if num_buckets == 0 {
                    return Err(config_err!("log bucketing needs at least one bucket"));
                }
                if !(base.is_finite() && base > 1.0) {
                    return Err(config_err!("log base must exceed 1, got {base}"));
                }
            }
            BucketScheme::LinearCapped { cap } => {
                if cap == 0 {
                    return Err(config_err!("linear bucketing needs cap >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn num_buckets(&self) -> usize {
        match *self {
            BucketScheme::Log { num_buckets, .. } => num_buckets,
            BucketScheme::LinearCapped { cap } => cap,
        }
    }
}

/// Largest `k` with `base^k <= p`, corrected against rounding in the
/// logarithm.
fn floor_log(p: u64, base: f64) -> u64 {
    let pf = p as f64;
    let mut k = math::floor(math::ln(pf) / math::ln(base)).max(0.0) as i32;
    while k > 0 && math::powi(base, k) > pf {
        k -= 1;
    }
    while math::powi(base, k + 1) <= pf {
        k += 1;
    }
    k as u64
}

/// Bucket of post number `p >= 1`; `p = 0` is treated as 1.
pub fn bucket_post_number(p: u64, scheme: &BucketScheme) -> usize {
    let p = p.max(1);
    match *scheme {
        BucketScheme::Log { num_buckets, base } => {
            let k = floor_log(p, base);
            (k.min(num_buckets.saturating_sub(1) as u64)) as usize
        }
        BucketScheme::LinearCapped { cap } => (p.min(cap as u64) as usize).saturating_sub(1),
    }
}

pub fn week_index(timestamp: i64, epoch_start: i64) -> Result<usize> {
    if timestamp < epoch_start {
        return Err(Error::Input(alloc::format!("timestamp {timestamp} precedes epoch start {epoch_start}")));
    }
    Ok(((timestamp - epoch_start) / SECONDS_PER_WEEK) as usize)
}

/// Start (Monday 00:00 UTC) of the week containing `timestamp`.
pub fn week_start(timestamp: i64) -> i64 {
    FIRST_MONDAY + (timestamp - FIRST_MONDAY).div_euclid(SECONDS_PER_WEEK) * SECONDS_PER_WEEK
}

/// Week start of the earliest post, or 0 for an empty log.
pub fn default_epoch_start(posts: &[PostRecord]) -> i64 {
    posts.iter().map(|p| p.timestamp).min().map(week_start).unwrap_or(0)
}

fn check_annotations(posts: &[PostRecord], post_numbers: &[u64]) -> Result<()> {
    if posts.len() != post_numbers.len() {
        return Err(Error::Input(alloc::format!(
            "{} posts but {} post numbers",
            posts.len(),
            post_numbers.len()
        )));
    }
    Ok(())
}

/// Count tensor of in-vocabulary token occurrences with dims
/// `(|vocab|, max week + 1, buckets)`.
pub fn build_corpus_tensor(
    posts: &[PostRecord],
    post_numbers: &[u64],
    vocab: &Vocabulary,
    scheme: &BucketScheme,
    epoch_start: i64,
) -> Result<CooTensor> {
    scheme.validate()?;
    check_annotations(posts, post_numbers)?;
    let mut weeks = Vec::with_capacity(posts.len());
    for p in posts {
        weeks.push(week_index(p.timestamp, epoch_start)?);
    }
    let j = weeks.iter().max().map_or(0, |w| w + 1);
    let mut counts: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for ((p, &n), &w) in posts.iter().zip(post_numbers).zip(&weeks) {
        let k = bucket_post_number(n, scheme);
        for t in &p.tokens {
            if let Some(i) = vocab.index_of(t) {
                *counts.entry((i, w, k)).or_insert(0.0) += 1.0;
            }
        }
    }
    let entries = counts.into_iter().map(|((i, j, k), v)| (i, j, k, v)).collect();
    CooTensor::new((vocab.len(), j, scheme.num_buckets()), entries)
}

/// Distinct tags of a post in first-seen order.
fn post_tags(p: &PostRecord) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    p.tags.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect()
}

/// Tags ranked by the number of in-vocabulary tokens in posts carrying
/// them, ties lexicographic; `exclude` is removed before truncating to `top`.
pub fn select_tags(posts: &[PostRecord], vocab: &Vocabulary, top: Option<usize>, exclude: &[String]) -> Vec<(String, u64)> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for p in posts {
        let n = p.tokens.iter().filter(|t| vocab.index_of(t).is_some()).count() as u64;
        for tag in post_tags(p) {
            *totals.entry(tag).or_insert(0) += n;
        }
    }
    let mut ranked: Vec<(String, u64)> = totals
        .into_iter()
        .filter(|(t, _)| !exclude.iter().any(|e| e == t))
        .map(|(t, c)| (String::from(t), c))
        .collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    if let Some(top) = top {
        ranked.truncate(top);
    }
    ranked
}

/// `Y[i, f]` counts uses of word `i` in posts tagged `tag_list[f]`.
pub fn build_tag_matrix(posts: &[PostRecord], vocab: &Vocabulary, tag_list: &[String]) -> Result<Matrix> {
    let mut col: BTreeMap<&str, usize> = BTreeMap::new();
    for (f, t) in tag_list.iter().enumerate() {
        if col.insert(t.as_str(), f).is_some() {
            return Err(Error::Input(alloc::format!("tag {t:?} listed twice")));
        }
    }
    let mut y = Matrix::zeros(vocab.len(), tag_list.len());
    for p in posts {
        let cols: Vec<usize> = post_tags(p).into_iter().filter_map(|t| col.get(t).copied()).collect();
        if cols.is_empty() {
            continue;
        }
        for t in &p.tokens {
            if let Some(i) = vocab.index_of(t) {
                for &f in &cols {
                    y.set(i, f, y.get(i, f) + 1.0);
                }
            }
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CorpusConfig {
    pub min_count: u64,
    pub buckets: BucketScheme,
    /// Defaults to the start of the earliest post's week.
    pub epoch_start: Option<i64>,
    pub top_tags: Option<usize>,
    pub exclude_tags: Vec<String>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_count: 100,
            buckets: BucketScheme::default(),
            epoch_start: None,
            top_tags: Some(30),
            exclude_tags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    /// Selected tags with their in-vocabulary token totals.
    pub tags: Vec<(String, u64)>,
    pub post_numbers: Vec<u64>,
    pub epoch_start: i64,
    pub tensor: CooTensor,
    pub side: Matrix,
}

pub fn build_corpus(posts: &[PostRecord], cfg: &CorpusConfig) -> Result<Corpus> {
    cfg.buckets.validate()?;
    if let Some(p) = posts.iter().find(|p| p.timestamp < 0) {
        return Err(Error::Input(alloc::format!("negative timestamp {}", p.timestamp)));
    }
    let vocab = build_vocabulary(posts, cfg.min_count);
    let post_numbers = assign_post_numbers(posts);
    let epoch_start = cfg.epoch_start.unwrap_or_else(|| default_epoch_start(posts));
    let tensor = build_corpus_tensor(posts, &post_numbers, &vocab, &cfg.buckets, epoch_start)?;
    let tags = select_tags(posts, &vocab, cfg.top_tags, &cfg.exclude_tags);
    let tag_names: Vec<String> = tags.iter().map(|(t, _)| t.clone()).collect();
    let side = build_tag_matrix(posts, &vocab, &tag_names)?;
    Ok(Corpus { vocab, tags, post_numbers, epoch_start, tensor, side })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_buckets() {
        let s = BucketScheme::natural_log(9);
        assert_eq!(bucket_post_number(1, &s), 0);
        assert_eq!(bucket_post_number(2, &s), 0);
        assert_eq!(bucket_post_number(3, &s), 1);
        assert_eq!(bucket_post_number(7, &s), 1);
        assert_eq!(bucket_post_number(8, &s), 2);
        assert_eq!(bucket_post_number(8103, &s), 8);
        assert_eq!(bucket_post_number(1_000_000, &s), 8);
    }

    #[test]
    fn integer_base_is_exact() {
        let s = BucketScheme::Log { num_buckets: 10, base: 10.0 };
        assert_eq!(bucket_post_number(999, &s), 2);
        assert_eq!(bucket_post_number(1000, &s), 3);
    }

    #[test]
    fn linear_cap() {
        let s = BucketScheme::LinearCapped { cap: 50 };
        assert_eq!(bucket_post_number(1, &s), 0);
        assert_eq!(bucket_post_number(50, &s), 49);
        assert_eq!(bucket_post_number(75, &s), 49);
    }

    #[test]
    fn weeks() {
        assert_eq!(week_index(1000, 1000).unwrap(), 0);
        assert_eq!(week_index(1000 + 604_800, 1000).unwrap(), 1);
        assert_eq!(week_index(1000 + 604_799, 1000).unwrap(), 0);
        assert!(week_index(999, 1000).is_err());
    }

    #[test]
    fn monday_week_start() {
        // 2024-01-03 (Wednesday) 12:00 UTC -> 2024-01-01 00:00 UTC.
        assert_eq!(week_start(1_704_283_200), 1_704_067_200);
        assert_eq!(week_start(1_704_067_200), 1_704_067_200);
        // Before the first Monday the start is the preceding Monday.
        assert_eq!(week_start(0), FIRST_MONDAY - SECONDS_PER_WEEK);
    }
}
