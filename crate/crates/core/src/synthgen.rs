//! Seeded synthetic datasets with a known tag-to-embedding relationship.
//!
//! Each item carries exactly one tag per category. Embeddings are a fixed
//! random linear map of the entropy-weighted tag vector plus Gaussian noise of
//! scale `noise`, so the score should fall as `noise` grows. Customers are
//! loyal to a favourite tag with a per-category probability that decreases
//! with the category index, which gives the categories distinct entropies.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{self, Dtype};
use crate::simcore::{EmbeddingSet, TagSet, VectorSet};
use crate::tagspace::{build_vocabulary, encode_all, ItemAnnotation, Tag};
use crate::weighting::{category_entropies, index_annotations, tag_weights, CategoryWeights, RentalHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingMap {
    /// Random matrix with orthonormal columns (`dim >= tags`) or rows (`dim < tags`).
    #[default]
    Orthonormal,
    /// The weighted tag vector itself; `dim` is ignored.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub tags: usize,
    pub categories: usize,
    pub dim: usize,
    pub noise: f64,
    pub seed: u64,
    pub customers: usize,
    pub rentals_per_customer: usize,
    pub map: EmbeddingMap,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 200,
            tags: 24,
            categories: 4,
            dim: 32,
            noise: 0.0,
            seed: 0,
            customers: 40,
            rentals_per_customer: 15,
            map: EmbeddingMap::Orthonormal,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n < 3 {
            return bad(format!("n >= 3 required, got {}", self.n));
        }
        if self.categories < 1 || self.tags < self.categories {
            return bad(format!("need tags >= categories >= 1, got {} tags, {} categories", self.tags, self.categories));
        }
        if self.dim < 1 {
            return bad("dim >= 1 required".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        Ok(())
    }

    fn category_name(&self, c: usize) -> String {
        let width = (self.categories - 1).to_string().len();
        format!("cat{c:0width$}")
    }

    /// Tag counts per category, as even as possible.
    fn category_sizes(&self) -> Vec<usize> {
        let (q, r) = (self.tags / self.categories, self.tags % self.categories);
        (0..self.categories).map(|c| q + usize::from(c < r)).collect()
    }

    /// Probability a customer rents their favourite tag in category `c`.
    fn loyalty(&self, c: usize) -> f64 {
        0.95 * (self.categories - c) as f64 / self.categories as f64
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub images: EmbeddingSet,
    /// Weighted tag vectors.
    pub tags: TagSet,
    pub unweighted_tags: TagSet,
    pub annotations: Vec<ItemAnnotation>,
    pub histories: Vec<RentalHistory>,
    pub weights: CategoryWeights,
}

impl SynthDataset {
    /// Writes `embeddings.bin` (f64), `ids.txt`, `annotations.jsonl`,
    /// `histories.jsonl` and `weights.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        ingest::write_embeddings(dir.join("embeddings.bin"), dir.join("ids.txt"), &self.images, Dtype::F64)?;
        ingest::write_annotations(dir.join("annotations.jsonl"), &self.annotations)?;
        ingest::write_histories(dir.join("histories.jsonl"), &self.histories)?;
        ingest::write_weights(dir.join("weights.json"), &self.weights)
    }
}

// independent streams so that e.g. changing `noise` leaves the tags untouched
const STREAM_TAGS: u64 = 1;
const STREAM_HISTORIES: u64 = 2;
const STREAM_MAP: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let sizes = spec.category_sizes();
    let cat_names: Vec<String> = (0..spec.categories).map(|c| spec.category_name(c)).collect();
    let tag = |c: usize, t: usize| Tag::new(cat_names[c].clone(), format!("t{t:03}"));

    // one tag index per category per item
    let mut rng = rng_for(spec.seed, STREAM_TAGS);
    let choices: Vec<Vec<usize>> = (0..spec.n)
        .map(|_| sizes.iter().map(|&s| rng.random_range(0..s)).collect())
        .collect();
    let id_width = (spec.n - 1).to_string().len();
    let annotations: Vec<ItemAnnotation> = choices
        .iter()
        .enumerate()
        .map(|(i, ch)| ItemAnnotation::new(format!("item{i:0id_width$}"), ch.iter().enumerate().map(|(c, &t)| tag(c, t))))
        .collect();

    let histories = draw_histories(spec, &sizes, &choices, &annotations);

    let vocab = build_vocabulary(&annotations, &BTreeSet::new())?;
    let index = index_annotations(&annotations);
    let weights = tag_weights(&category_entropies(&histories, &index, &vocab)?);
    let tags = encode_all(&annotations, &vocab, Some(&weights))?;
    let unweighted_tags = encode_all(&annotations, &vocab, None)?;

    let images = embed(spec, &tags)?;
    Ok(SynthDataset { images, tags, unweighted_tags, annotations, histories, weights })
}

fn draw_histories(
    spec: &SynthSpec,
    sizes: &[usize],
    choices: &[Vec<usize>],
    annotations: &[ItemAnnotation],
) -> Vec<RentalHistory> {
    let mut rng = rng_for(spec.seed, STREAM_HISTORIES);
    let loyalty: Vec<f64> = (0..spec.categories).map(|c| spec.loyalty(c)).collect();
    (0..spec.customers)
        .map(|u| {
            let favourite: Vec<usize> = sizes.iter().map(|&s| rng.random_range(0..s)).collect();
            let item_ids = (0..spec.rentals_per_customer)
                .map(|_| {
                    let wanted: Vec<usize> = sizes
                        .iter()
                        .enumerate()
                        .map(|(c, &s)| if rng.random_bool(loyalty[c]) { favourite[c] } else { rng.random_range(0..s) })
                        .collect();
                    // best match, categories weighted by loyalty; first index wins ties
                    let mut best = (f64::NEG_INFINITY, 0);
                    for (i, ch) in choices.iter().enumerate() {
                        let score: f64 = (0..sizes.len()).filter(|&c| ch[c] == wanted[c]).map(|c| loyalty[c]).sum();
                        if score > best.0 {
                            best = (score, i);
                        }
                    }
                    annotations[best.1].item_id.clone()
                })
                .collect();
            RentalHistory { customer_id: format!("cust{u}"), item_ids }
        })
        .collect()
}

fn embed(spec: &SynthSpec, tags: &TagSet) -> Result<EmbeddingSet> {
    let t = tags.dim();
    let clean: Vec<f64> = match spec.map {
        EmbeddingMap::Identity => tags.data().to_vec(),
        EmbeddingMap::Orthonormal => {
            let w = orthonormal_map(spec.dim, t, spec.seed);
            let mut out = Vec::with_capacity(tags.len() * spec.dim);
            for row in tags.rows() {
                let v = &w * nalgebra::DVector::from_column_slice(row);
                out.extend(v.iter().copied());
            }
            out
        }
    };
    let d = clean.len() / tags.len();
    let mut rng = rng_for(spec.seed, STREAM_NOISE);
    let data = clean
        .into_iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + spec.noise * e
        })
        .collect();
    VectorSet::new(tags.item_ids().to_vec(), d, data)
}

/// `rows x cols` matrix whose smaller dimension is orthonormal.
fn orthonormal_map(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, STREAM_MAP);
    let (r, c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let g = DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}
