//! Tag vocabulary and indicator-vector encoding of annotated items.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::TagSet;
use crate::weighting::CategoryWeights;

/// Categories that describe the garment rather than the photo and are
/// dropped unless configured otherwise.
pub const DEFAULT_DROPPED: [&str; 2] = ["Size", "Shoe Size"];

pub fn default_dropped() -> BTreeSet<String> {
    DEFAULT_DROPPED.iter().map(|s| s.to_string()).collect()
}

/// A `(category, name)` pair. Ordering is lexicographic by category, then name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub category: String,
    pub name: String,
}

impl Tag {
    pub fn new(category: impl Into<String>, name: impl Into<String>) -> Self {
        Tag { category: category.into(), name: name.into() }
    }
}

/// One annotated item. Duplicate tags collapse (set semantics).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAnnotation {
    pub item_id: String,
    pub tags: BTreeSet<Tag>,
}

impl ItemAnnotation {
    pub fn new(item_id: impl Into<String>, tags: impl IntoIterator<Item = Tag>) -> Self {
        ItemAnnotation { item_id: item_id.into(), tags: tags.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagVocabulary {
    categories: Vec<String>,
    tags: Vec<Tag>,
    index: HashMap<Tag, usize>,
    dropped: BTreeSet<String>,
}

impl TagVocabulary {
    /// Number of dimensions `T`.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Non-dropped categories, sorted.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn dropped(&self) -> &BTreeSet<String> {
        &self.dropped
    }

    pub fn is_dropped(&self, category: &str) -> bool {
        self.dropped.contains(category)
    }

    pub fn index_of(&self, tag: &Tag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    /// Tags of one category, in vocabulary order.
    pub fn tags_in<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a Tag> + 'a {
        self.tags.iter().filter(move |t| t.category == category)
    }

    /// `|X|` for every category.
    pub fn category_sizes(&self) -> std::collections::BTreeMap<String, usize> {
        let mut sizes = std::collections::BTreeMap::new();
        for tag in &self.tags {
            *sizes.entry(tag.category.clone()).or_insert(0) += 1;
        }
        sizes
    }
}

/// Collects the distinct non-dropped tags observed in `annotations`.
pub fn build_vocabulary(
    annotations: &[ItemAnnotation],
    dropped: &BTreeSet<String>,
) -> Result<TagVocabulary> {
    if annotations.is_empty() {
        return Err(Error::NoAnnotations);
    }
    let tags: Vec<Tag> = annotations
        .iter()
        .flat_map(|a| a.tags.iter())
        .filter(|t| !dropped.contains(&t.category))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let categories: Vec<String> = tags
        .iter()
        .map(|t| t.category.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(TagVocabulary { categories, tags, index, dropped: dropped.clone() })
}

/// Dense indicator vector for one item, length `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemTagVector {
    pub item_id: String,
    pub values: Vec<f64>,
}

/// Encodes `annotation` over `vocab`. With weights, each set component is the
/// weight of its category (1.0 for categories missing from the map).
pub fn encode(
    annotation: &ItemAnnotation,
    vocab: &TagVocabulary,
    weights: Option<&CategoryWeights>,
) -> Result<ItemTagVector> {
    let mut values = vec![0.0; vocab.len()];
    for tag in &annotation.tags {
        if vocab.is_dropped(&tag.category) {
            continue;
        }
        let idx = vocab.index_of(tag).ok_or_else(|| Error::UnknownTag {
            category: tag.category.clone(),
            name: tag.name.clone(),
        })?;
        values[idx] = weights.map_or(1.0, |w| w.get(&tag.category));
    }
    Ok(ItemTagVector { item_id: annotation.item_id.clone(), values })
}

/// Encodes every annotation and stacks them into a [`TagSet`] in input order.
pub fn encode_all(
    annotations: &[ItemAnnotation],
    vocab: &TagVocabulary,
    weights: Option<&CategoryWeights>,
) -> Result<TagSet> {
    let mut ids = Vec::with_capacity(annotations.len());
    let mut data = Vec::with_capacity(annotations.len() * vocab.len());
    for a in annotations {
        let v = encode(a, vocab, weights)?;
        ids.push(v.item_id);
        data.extend_from_slice(&v.values);
    }
    TagSet::new(ids, vocab.len(), data)
}

/// Annotations reordered to follow `item_ids`. Every id needs an annotation;
/// annotations for other items are ignored.
pub fn align_annotations(annotations: &[ItemAnnotation], item_ids: &[String]) -> Result<Vec<ItemAnnotation>> {
    let by_id: HashMap<&str, &ItemAnnotation> = annotations.iter().map(|a| (a.item_id.as_str(), a)).collect();
    item_ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|a| (*a).clone())
                .ok_or_else(|| Error::InvalidInput(format!("no annotation for item {id:?}")))
        })
        .collect()
}

/// Rejects empty and duplicate item ids.
pub fn check_annotation_ids(annotations: &[ItemAnnotation]) -> Result<()> {
    let mut seen = HashSet::with_capacity(annotations.len());
    for a in annotations {
        if a.item_id.is_empty() {
            return Err(Error::EmptyItemId);
        }
        if !seen.insert(a.item_id.as_str()) {
            return Err(Error::DuplicateItem(a.item_id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(id: &str, tags: &[(&str, &str)]) -> ItemAnnotation {
        ItemAnnotation::new(id, tags.iter().map(|(c, n)| Tag::new(*c, *n)))
    }

    #[test]
    fn align_follows_embedding_order() {
        let anns = vec![ann("a", &[("Color", "Red")]), ann("b", &[("Color", "Blue")]), ann("z", &[])];
        let ids = vec!["b".to_string(), "a".to_string()];
        let aligned = align_annotations(&anns, &ids).unwrap();
        assert_eq!(aligned.iter().map(|a| a.item_id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert!(align_annotations(&anns, &["q".to_string()]).is_err());
    }

    #[test]
    fn drop_rule() {
        let anns = vec![
            ann("a", &[("Color", "Red")]),
            ann("b", &[("Color", "Blue")]),
            ann("c", &[("Size", "XL")]),
        ];
        let dropped: BTreeSet<String> = ["Size".to_string()].into();
        let v = build_vocabulary(&anns, &dropped).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.categories(), &["Color".to_string()]);

        let v = build_vocabulary(&anns, &BTreeSet::new()).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn vocabulary_is_sorted_and_dense() {
        let anns = vec![ann("a", &[("Pattern", "Dots"), ("Color", "Red")]), ann("b", &[("Color", "Blue")])];
        let v = build_vocabulary(&anns, &default_dropped()).unwrap();
        let names: Vec<_> = v.tags().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["Blue", "Red", "Dots"]);
        for (i, t) in v.tags().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
        }
    }

    #[test]
    fn empty_annotations_rejected() {
        assert!(matches!(build_vocabulary(&[], &BTreeSet::new()), Err(Error::NoAnnotations)));
    }

    #[test]
    fn encode_plain_and_weighted() {
        let anns = vec![ann("a", &[("Color", "Blue")]), ann("b", &[("Color", "Red")])];
        let v = build_vocabulary(&anns, &BTreeSet::new()).unwrap();
        let q = ann("q", &[("Color", "Red")]);
        assert_eq!(encode(&q, &v, None).unwrap().values, vec![0.0, 1.0]);
        let w = CategoryWeights::from_iter([("Color".to_string(), 0.5)]);
        assert_eq!(encode(&q, &v, Some(&w)).unwrap().values, vec![0.0, 0.5]);
    }

    #[test]
    fn dropped_only_item_encodes_to_zero() {
        let anns = vec![ann("a", &[("Color", "Blue")])];
        let v = build_vocabulary(&anns, &default_dropped()).unwrap();
        let q = ann("q", &[("Size", "XL"), ("Shoe Size", "38")]);
        assert_eq!(encode(&q, &v, None).unwrap().values, vec![0.0]);
    }

    #[test]
    fn unknown_tag_is_named() {
        let anns = vec![ann("a", &[("Color", "Blue")])];
        let v = build_vocabulary(&anns, &BTreeSet::new()).unwrap();
        let err = encode(&ann("q", &[("Color", "Teal")]), &v, None).unwrap_err();
        assert!(err.to_string().contains("Teal"), "{err}");
    }

    #[test]
    fn tag_names_are_case_sensitive() {
        let anns = vec![ann("a", &[("Color", "red")]), ann("b", &[("Color", "Red")])];
        let v = build_vocabulary(&anns, &BTreeSet::new()).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn duplicate_ids_detected() {
        let anns = vec![ann("a", &[]), ann("a", &[])];
        assert!(matches!(check_annotation_ids(&anns), Err(Error::DuplicateItem(id)) if id == "a"));
        assert!(matches!(check_annotation_ids(&[ann("", &[])]), Err(Error::EmptyItemId)));
    }
}
