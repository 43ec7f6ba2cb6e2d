//! Cosine similarity profiles, Pearson correlation and the mean per-item
//! correlation score.
//!
//! Every sum runs in ascending index order, and the final mean is reduced
//! sequentially over items in index order, so a score does not depend on the
//! number of worker threads.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};

/// `n` labelled row vectors of dimension `d`, stored row-major in 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    item_ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

/// Image embeddings, one row per item.
pub type EmbeddingSet = VectorSet;
/// Stacked (weighted) tag vectors, one row per item.
pub type TagSet = VectorSet;

impl VectorSet {
    pub fn new(item_ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        let n = item_ids.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("n >= 2 required, got {n}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if data.len() != n * dim {
            return Err(Error::LengthMismatch { left: data.len(), right: n * dim });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in row {} ({:?})",
                pos / dim,
                item_ids[pos / dim]
            )));
        }
        Ok(VectorSet { item_ids, dim, data })
    }

    pub fn from_rows(item_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch { left: bad.len(), right: dim });
        }
        if rows.len() != item_ids.len() {
            return Err(Error::IdCountMismatch { expected: rows.len(), found: item_ids.len() });
        }
        Self::new(item_ids, dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.item_ids.iter().position(|id| id == item_id)
    }

    /// Same ids, rows taken from `order` (row `i` of the result is row `order[i]` of `self`).
    pub fn with_row_order(&self, order: &[usize]) -> VectorSet {
        let data = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        VectorSet { item_ids: self.item_ids.clone(), dim: self.dim, data }
    }

    /// Same ids, new payload of identical shape.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> VectorSet {
        debug_assert_eq!(data.len(), self.data.len());
        VectorSet { item_ids: self.item_ids.clone(), dim: self.dim, data }
    }

    /// Fraction of nonzero entries.
    pub fn density(&self) -> f64 {
        self.data.iter().filter(|v| **v != 0.0).count() as f64 / self.data.len() as f64
    }

    /// Squared row norms; errors on the first zero row.
    fn squared_norms(&self) -> Result<Vec<f64>> {
        self.rows()
            .zip(&self.item_ids)
            .map(|(r, id)| {
                let n = dot(r, r);
                if n > 0.0 {
                    Ok(n)
                } else {
                    Err(Error::ZeroNormItem { item_id: id.clone() })
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quotient `num / sqrt(ssa * ssb)`. Taking one square root of the product
/// keeps `x·x / sqrt(|x|² |x|²)` at exactly 1.
#[inline]
fn normalized(num: f64, ssa: f64, ssb: f64) -> f64 {
    let prod = ssa * ssb;
    let denom = if prod.is_finite() && prod >= f64::MIN_POSITIVE {
        prod.sqrt()
    } else {
        ssa.sqrt() * ssb.sqrt()
    };
    (num / denom).clamp(-1.0, 1.0)
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let (ssa, ssb) = (dot(a, a), dot(b, b));
    if ssa <= 0.0 {
        return Err(Error::ZeroNorm { side: Side::Left });
    }
    if ssb <= 0.0 {
        return Err(Error::ZeroNorm { side: Side::Right });
    }
    Ok(normalized(dot(a, b), ssa, ssb))
}

/// Cosine similarities of one item to the others, in ascending item order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityProfile {
    pub query_index: usize,
    pub values: Vec<f64>,
}

/// Squared row norms computed once and reused across every profile of a set.
struct Profiler<'a> {
    set: &'a VectorSet,
    sq_norms: Vec<f64>,
}

impl<'a> Profiler<'a> {
    fn new(set: &'a VectorSet) -> Result<Self> {
        Ok(Profiler { set, sq_norms: set.squared_norms()? })
    }

    fn profile(&self, i: usize, include_self: bool) -> Vec<f64> {
        let q = self.set.row(i);
        let sq = self.sq_norms[i];
        (0..self.set.len())
            .filter(|&j| include_self || j != i)
            .map(|j| normalized(dot(q, self.set.row(j)), sq, self.sq_norms[j]))
            .collect()
    }
}

pub fn similarity_profile(set: &VectorSet, i: usize, include_self: bool) -> Result<SimilarityProfile> {
    if i >= set.len() {
        return Err(Error::InvalidInput(format!("index {i} out of range for {} items", set.len())));
    }
    let profiler = Profiler::new(set)?;
    Ok(SimilarityProfile { query_index: i, values: profiler.profile(i, include_self) })
}

/// Sample Pearson correlation. `Ok(None)` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!("pearson needs at least 2 points, got {}", x.len())));
    }
    if is_constant(x) || is_constant(y) {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(normalized(sxy, sxx, syy)))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Which query items enter the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Sample {
    #[default]
    All,
    /// `k` items drawn without replacement.
    Count(usize),
}

impl FromStr for Sample {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Sample::All);
        }
        s.parse::<usize>()
            .map(Sample::Count)
            .map_err(|_| format!("expected \"all\" or a positive integer, got {s:?}"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorrEmbedOptions {
    pub sample: Sample,
    pub seed: u64,
    pub include_self: bool,
    /// Run on a dedicated pool of this many threads instead of the global one.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: String,
    /// `None` when the item's tag or image profile is constant.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrEmbedResult {
    pub per_item: Vec<ItemScore>,
    pub mean: f64,
    pub n_scored: usize,
    pub n_skipped: usize,
}

/// Checks that two sets describe the same items in the same order.
pub fn check_aligned(a: &VectorSet, b: &VectorSet) -> Result<()> {
    for (index, (l, r)) in a.item_ids.iter().zip(&b.item_ids).enumerate() {
        if l != r {
            return Err(Error::Misaligned { index, left: l.clone(), right: r.clone() });
        }
    }
    if a.len() != b.len() {
        let index = a.len().min(b.len());
        let side = |s: &VectorSet| s.item_ids.get(index).cloned().unwrap_or_else(|| "<missing>".into());
        return Err(Error::Misaligned { index, left: side(a), right: side(b) });
    }
    Ok(())
}

/// Sorted query indices for `sample`.
pub fn sample_indices(n: usize, sample: Sample, seed: u64) -> Result<Vec<usize>> {
    match sample {
        Sample::All => Ok((0..n).collect()),
        Sample::Count(0) => Err(Error::InvalidInput("sample size must be at least 1".into())),
        Sample::Count(k) if k >= n => Ok((0..n).collect()),
        Sample::Count(k) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

/// Mean over items of the Pearson correlation between each item's tag-space
/// and image-space cosine profiles.
pub fn corr_embed(images: &EmbeddingSet, tags: &TagSet, opts: &CorrEmbedOptions) -> Result<CorrEmbedResult> {
    match opts.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(|| corr_embed_inner(images, tags, opts))
        }
        None => corr_embed_inner(images, tags, opts),
    }
}

fn corr_embed_inner(images: &EmbeddingSet, tags: &TagSet, opts: &CorrEmbedOptions) -> Result<CorrEmbedResult> {
    check_aligned(images, tags)?;
    let n = images.len();
    if !opts.include_self && n < 3 {
        return Err(Error::InvalidInput(format!("n >= 3 required when self-pairs are excluded, got {n}")));
    }
    let indices = sample_indices(n, opts.sample, opts.seed)?;
    let img = Profiler::new(images)?;
    let tag = Profiler::new(tags)?;

    let scores: Vec<Option<f64>> = indices
        .par_iter()
        .map(|&i| {
            let x = tag.profile(i, opts.include_self);
            let y = img.profile(i, opts.include_self);
            pearson(&x, &y)
        })
        .collect::<Result<_>>()?;

    let mut sum = 0.0;
    let mut n_scored = 0;
    for r in scores.iter().flatten() {
        sum += r;
        n_scored += 1;
    }
    if n_scored == 0 {
        return Err(Error::DegenerateTagSpace);
    }
    let per_item = indices
        .iter()
        .zip(scores)
        .map(|(&i, correlation)| ItemScore { item_id: images.item_ids[i].clone(), correlation })
        .collect::<Vec<_>>();
    Ok(CorrEmbedResult {
        n_skipped: per_item.len() - n_scored,
        per_item,
        mean: sum / n_scored as f64,
        n_scored,
    })
}
