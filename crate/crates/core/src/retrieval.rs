//! Exact top-k similar-item search by brute-force cosine scan.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simcore::{similarity_profile, EmbeddingSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub item_id: String,
    pub similarity: f64,
}

/// Neighbours of `query_id`, by descending similarity, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborList {
    pub query_id: String,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    /// `rank\titem_id\tsimilarity` lines, rank starting at 1.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\titem_id\tsimilarity\n");
        for (rank, n) in self.neighbors.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{:.12}\n", rank + 1, n.item_id, n.similarity));
        }
        out
    }
}

pub fn top_k(set: &EmbeddingSet, query_id: &str, k: usize) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let q = set.position(query_id).ok_or_else(|| Error::UnknownQuery(query_id.to_string()))?;
    let profile = similarity_profile(set, q, true)?;
    let mut neighbors: Vec<Neighbor> = profile
        .values
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| j != q)
        .map(|(j, similarity)| Neighbor { item_id: set.item_ids()[j].clone(), similarity })
        .collect();
    neighbors.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    neighbors.truncate(k);
    Ok(NeighborList { query_id: query_id.to_string(), neighbors })
}
