//! Shape-preserving randomizations that give the chance-level score.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{corr_embed, CorrEmbedOptions, EmbeddingSet, TagSet, VectorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    RandomEmbeddings,
    RandomTags,
    ShuffleEmbeddings,
    ShuffleTags,
}

impl ControlKind {
    pub const ALL: [ControlKind; 4] = [
        ControlKind::RandomEmbeddings,
        ControlKind::RandomTags,
        ControlKind::ShuffleEmbeddings,
        ControlKind::ShuffleTags,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlKind::RandomEmbeddings => "random_embeddings",
            ControlKind::RandomTags => "random_tags",
            ControlKind::ShuffleEmbeddings => "shuffle_embeddings",
            ControlKind::ShuffleTags => "shuffle_tags",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub kind: ControlKind,
    pub seed: u64,
}

/// Entries i.i.d. uniform on `[0, 1)`, same shape and ids as `template`.
pub fn random_embeddings(template: &EmbeddingSet, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..template.data().len()).map(|_| rng.random::<f64>()).collect();
    template.with_data(data)
}

/// Binary matrix where each entry is 1 with probability `density`. All-zero
/// rows are redrawn so every item has at least one tag.
pub fn random_tags(template: &TagSet, density: f64, seed: u64) -> Result<TagSet> {
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::InvalidInput(format!("density must lie in (0, 1), got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = template.dim();
    let mut data = Vec::with_capacity(template.data().len());
    let mut row = vec![0.0; d];
    for _ in 0..template.len() {
        loop {
            for v in row.iter_mut() {
                *v = if rng.random_bool(density) { 1.0 } else { 0.0 };
            }
            if row.iter().any(|&v| v != 0.0) {
                break;
            }
        }
        data.extend_from_slice(&row);
    }
    Ok(template.with_data(data))
}

/// Rows permuted uniformly at random; ids stay put, so the id-to-row
/// association is broken.
pub fn shuffle_assignment(set: &VectorSet, seed: u64) -> VectorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut rng);
    set.with_row_order(&order)
}

/// Score of one control. `density` only applies to [`ControlKind::RandomTags`]
/// and defaults to the density of `tags`.
pub fn control_score(
    images: &EmbeddingSet,
    tags: &TagSet,
    spec: ControlSpec,
    density: Option<f64>,
    opts: &CorrEmbedOptions,
) -> Result<f64> {
    let r = match spec.kind {
        ControlKind::RandomEmbeddings => corr_embed(&random_embeddings(images, spec.seed), tags, opts)?,
        ControlKind::RandomTags => {
            let density = density.unwrap_or_else(|| tags.density());
            corr_embed(images, &random_tags(tags, density, spec.seed)?, opts)?
        }
        ControlKind::ShuffleEmbeddings => corr_embed(&shuffle_assignment(images, spec.seed), tags, opts)?,
        ControlKind::ShuffleTags => corr_embed(images, &shuffle_assignment(tags, spec.seed), opts)?,
    };
    Ok(r.mean)
}

/// Scores of one control over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub kind: ControlKind,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Largest `|score - mean|`.
    pub max_deviation: f64,
}

impl ControlSummary {
    pub fn from_scores(kind: ControlKind, seeds: Vec<u64>, scores: Vec<f64>) -> Self {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let max_deviation = scores.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
        ControlSummary { kind, seeds, scores, mean, max_deviation }
    }

    pub fn max_abs(&self) -> f64 {
        self.scores.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }
}

/// `count` consecutive seeds starting at `base`.
pub fn seed_series(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

pub fn control_summary(
    images: &EmbeddingSet,
    tags: &TagSet,
    kind: ControlKind,
    seeds: &[u64],
    density: Option<f64>,
    opts: &CorrEmbedOptions,
) -> Result<ControlSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one control seed required".into()));
    }
    let scores = seeds
        .iter()
        .map(|&seed| control_score(images, tags, ControlSpec { kind, seed }, density, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSummary::from_scores(kind, seeds.to_vec(), scores))
}
