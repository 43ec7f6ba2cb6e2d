//! Scores how well an image-embedding space reproduces the similarity
//! structure of human tag annotations.
//!
//! For every item the cosine similarities to all other items are computed
//! once in embedding space and once in (entropy-weighted) tag space; the
//! score is the mean Pearson correlation between those two profiles.
//!
//! Module map:
//! - [`tagspace`]: tag vocabulary and indicator encoding
//! - [`weighting`]: rental-history entropy and category weights
//! - [`simcore`]: cosine profiles, Pearson, the mean-correlation score
//! - [`controls`]: random and shuffled baselines
//! - [`retrieval`]: exact top-k neighbours
//! - [`synthgen`]: seeded synthetic datasets
//! - [`ingest`]: file formats and bundled fixtures
//! - [`report`]: score reports and meta-correlation over published tables

pub mod controls;
pub mod error;
pub mod ingest;
pub mod report;
pub mod retrieval;
pub mod simcore;
pub mod synthgen;
pub mod tagspace;
pub mod weighting;

pub use error::{Error, Result};
pub use simcore::{
    corr_embed, cosine, pearson, similarity_profile, CorrEmbedOptions, CorrEmbedResult,
    EmbeddingSet, Sample, SimilarityProfile, TagSet, VectorSet,
};
pub use tagspace::{build_vocabulary, encode, ItemAnnotation, ItemTagVector, Tag, TagVocabulary};
pub use weighting::{category_entropy, tag_weights, CategoryEntropy, CategoryWeights, RentalHistory};
