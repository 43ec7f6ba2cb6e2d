//! Category weights from customer rental histories.
//!
//! For each tag category the per-customer Shannon entropy of that category's
//! tag distribution is averaged over customers; low entropy means customers
//! stick to a few tags. Entropies are then min-max normalized and inverted so
//! the most consistent category gets weight 1 and the least consistent 0.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagspace::{ItemAnnotation, TagVocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RentalHistory {
    pub customer_id: String,
    pub item_ids: Vec<String>,
}

pub type AnnotationIndex<'a> = HashMap<&'a str, &'a ItemAnnotation>;

pub fn index_annotations(annotations: &[ItemAnnotation]) -> AnnotationIndex<'_> {
    annotations.iter().map(|a| (a.item_id.as_str(), a)).collect()
}

/// Mean per-customer entropy of one category, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEntropy {
    pub category: String,
    /// `None` when no customer rented anything tagged in this category.
    pub value: Option<f64>,
    pub customers_counted: usize,
}

impl CategoryEntropy {
    /// Re-expresses the entropy with logarithm base `base`.
    pub fn in_base(&self, base: f64) -> CategoryEntropy {
        CategoryEntropy { value: self.value.map(|h| h / base.ln()), ..self.clone() }
    }
}

/// Shannon entropy `-sum p ln p` of a count distribution. Zero counts contribute 0.
pub fn shannon_entropy<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>();
    // -0.0 for single-outcome distributions
    h.max(0.0)
}

pub fn category_entropy(
    histories: &[RentalHistory],
    annotations: &AnnotationIndex<'_>,
    category: &str,
) -> Result<CategoryEntropy> {
    let mut sum = 0.0;
    let mut counted = 0usize;
    for history in histories {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for item in &history.item_ids {
            let ann = annotations.get(item.as_str()).ok_or_else(|| Error::UnknownItem {
                customer: history.customer_id.clone(),
                item: item.clone(),
            })?;
            for tag in ann.tags.iter().filter(|t| t.category == category) {
                *counts.entry(tag.name.as_str()).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            continue;
        }
        sum += shannon_entropy(counts.into_values());
        counted += 1;
    }
    Ok(CategoryEntropy {
        category: category.to_string(),
        value: (counted > 0).then(|| sum / counted as f64),
        customers_counted: counted,
    })
}

/// Entropy of every vocabulary category, in category order.
pub fn category_entropies(
    histories: &[RentalHistory],
    annotations: &AnnotationIndex<'_>,
    vocab: &TagVocabulary,
) -> Result<Vec<CategoryEntropy>> {
    vocab
        .categories()
        .par_iter()
        .map(|c| category_entropy(histories, annotations, c))
        .collect()
}

/// Weight per category in `[0, 1]`. Categories absent from the map weigh 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryWeights(BTreeMap<String, f64>);

impl CategoryWeights {
    pub fn get(&self, category: &str) -> f64 {
        self.0.get(category).copied().unwrap_or(1.0)
    }

    pub fn insert(&mut self, category: impl Into<String>, weight: f64) {
        self.0.insert(category.into(), weight);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

impl FromIterator<(String, f64)> for CategoryWeights {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        CategoryWeights(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum Normalization {
    /// `1 - (H - min H) / (max H - min H)` over the observed categories.
    #[default]
    Observed,
    /// `1 - H / ln |X|` using each category's tag count.
    TheoreticalMax(BTreeMap<String, usize>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightOptions {
    /// Lower bound applied after normalization. 0 keeps the max-entropy category at 0.
    pub floor: f64,
    pub normalization: Normalization,
}

pub fn tag_weights(entropies: &[CategoryEntropy]) -> CategoryWeights {
    tag_weights_with(entropies, &WeightOptions::default())
}

pub fn tag_weights_with(entropies: &[CategoryEntropy], opts: &WeightOptions) -> CategoryWeights {
    let defined = entropies.iter().filter_map(|e| e.value);
    let (min, max) = defined.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h), hi.max(h)));

    entropies
        .iter()
        .map(|e| {
            let w = match e.value {
                None => {
                    log::warn!("category {:?} has no rental signal; weight 1.0", e.category);
                    1.0
                }
                Some(h) => match &opts.normalization {
                    Normalization::Observed if max > min => 1.0 - (h - min) / (max - min),
                    Normalization::Observed => 1.0,
                    Normalization::TheoreticalMax(sizes) => match sizes.get(&e.category) {
                        Some(&n) if n > 1 => 1.0 - h / (n as f64).ln(),
                        _ => 1.0,
                    },
                },
            };
            (e.category.clone(), w.clamp(0.0, 1.0).max(opts.floor.min(1.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagspace::Tag;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn item(id: &str, tags: &[(&str, &str)]) -> ItemAnnotation {
        ItemAnnotation::new(id, tags.iter().map(|(c, n)| Tag::new(*c, *n)))
    }

    fn hist(id: &str, items: &[&str]) -> RentalHistory {
        RentalHistory { customer_id: id.into(), item_ids: items.iter().map(|s| s.to_string()).collect() }
    }

    fn h(cat: &str, v: f64) -> CategoryEntropy {
        CategoryEntropy { category: cat.into(), value: Some(v), customers_counted: 1 }
    }

    #[test]
    fn single_tag_customer_has_zero_entropy() {
        let items = [item("a", &[("Pattern", "Dots")]), item("b", &[("Pattern", "Dots")])];
        let idx = index_annotations(&items);
        let e = category_entropy(&[hist("c", &["a", "b", "a"])], &idx, "Pattern").unwrap();
        assert_eq!(e.value, Some(0.0));
        assert_eq!(e.customers_counted, 1);
    }

    #[test]
    fn uniform_four_colors_is_ln4() {
        let items: Vec<_> = ["Red", "Blue", "Green", "Black"]
            .iter()
            .map(|c| item(c, &[("Color", c)]))
            .collect();
        let idx = index_annotations(&items);
        let e = category_entropy(&[hist("c", &["Red", "Blue", "Green", "Black"])], &idx, "Color").unwrap();
        assert!((e.value.unwrap() - 1.3862943611198906).abs() < 1e-12);
    }

    #[test]
    fn two_customer_mean() {
        let items = [item("r", &[("Color", "Red")]), item("b", &[("Color", "Blue")])];
        let idx = index_annotations(&items);
        let hs = [hist("x", &["r", "r"]), hist("y", &["r", "b"])];
        let e = category_entropy(&hs, &idx, "Color").unwrap();
        assert!((e.value.unwrap() - 0.34657359027997264).abs() < 1e-12);
        assert_eq!(e.customers_counted, 2);
    }

    #[test]
    fn customers_without_category_are_not_counted() {
        let items = [item("r", &[("Color", "Red")]), item("p", &[("Pattern", "Dots")])];
        let idx = index_annotations(&items);
        let hs = [hist("x", &["r"]), hist("y", &["p"]), hist("z", &[])];
        let e = category_entropy(&hs, &idx, "Color").unwrap();
        assert_eq!(e.customers_counted, 1);
        let e = category_entropy(&hs, &idx, "Fit").unwrap();
        assert_eq!(e.value, None);
    }

    #[test]
    fn unknown_item_reported() {
        let items = [item("r", &[("Color", "Red")])];
        let idx = index_annotations(&items);
        let err = category_entropy(&[hist("x", &["nope"])], &idx, "Color").unwrap_err();
        assert!(matches!(err, Error::UnknownItem { ref item, .. } if item == "nope"));
    }

    #[test]
    fn weight_endpoints() {
        let w = tag_weights(&[h("A", 0.0), h("B", LN2)]);
        assert_eq!(w.get("A"), 1.0);
        assert_eq!(w.get("B"), 0.0);
    }

    #[test]
    fn equal_entropies_give_unit_weights() {
        let w = tag_weights(&[h("A", 0.7), h("B", 0.7), h("C", 0.7)]);
        assert!(w.iter().all(|(_, &v)| v == 1.0));
    }

    #[test]
    fn three_level_weights() {
        let w = tag_weights(&[h("A", 0.0), h("B", 0.5), h("C", 1.0)]);
        assert_eq!((w.get("A"), w.get("B"), w.get("C")), (1.0, 0.5, 0.0));
    }

    #[test]
    fn no_signal_category_gets_one() {
        let none = CategoryEntropy { category: "Z".into(), value: None, customers_counted: 0 };
        let w = tag_weights(&[h("A", 0.0), h("B", 1.0), none]);
        assert_eq!(w.get("Z"), 1.0);
        assert_eq!(w.get("B"), 0.0);
    }

    #[test]
    fn floor_keeps_max_entropy_alive() {
        let opts = WeightOptions { floor: 0.1, ..Default::default() };
        let w = tag_weights_with(&[h("A", 0.0), h("B", 1.0)], &opts);
        assert_eq!(w.get("B"), 0.1);
        assert_eq!(w.get("A"), 1.0);
    }

    #[test]
    fn theoretical_max_normalization() {
        let sizes: BTreeMap<String, usize> = [("A".to_string(), 4), ("B".to_string(), 2), ("C".to_string(), 1)].into();
        let opts = WeightOptions { normalization: Normalization::TheoreticalMax(sizes), ..Default::default() };
        let w = tag_weights_with(&[h("A", 4f64.ln()), h("B", 0.5 * LN2), h("C", 0.0)], &opts);
        assert!((w.get("A") - 0.0).abs() < 1e-15);
        assert!((w.get("B") - 0.5).abs() < 1e-15);
        assert_eq!(w.get("C"), 1.0);
    }

    /// A blue blazer sits closer to a red blazer than to a blue jumpsuit once
    /// the garment category outweighs color.
    #[test]
    fn category_outweighing_color_pulls_blazers_together() {
        use crate::simcore::cosine;
        let cases = [(0.3, 0.9), (0.01, 0.02), (0.5, 1.0)];
        for (wc, wk) in cases {
            // dims: Blue, Red, Blazers, Jumpsuits
            let blue_blazer = [wc, 0.0, wk, 0.0];
            let red_blazer = [0.0, wc, wk, 0.0];
            let blue_jumpsuit = [wc, 0.0, 0.0, wk];
            let near = cosine(&blue_blazer, &red_blazer).unwrap();
            let far = cosine(&blue_blazer, &blue_jumpsuit).unwrap();
            assert!(near > far, "wc={wc} wk={wk}: {near} <= {far}");
        }
        // equal weights tie
        let a = cosine(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let b = cosine(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    fn entropy_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, 1..8)
    }

    proptest! {
        #[test]
        fn weights_bounded_and_antitone(hs in entropy_strategy()) {
            let es: Vec<_> = hs.iter().enumerate().map(|(i, &v)| h(&format!("c{i}"), v)).collect();
            let w = tag_weights(&es);
            for (i, &hi) in hs.iter().enumerate() {
                let wi = w.get(&format!("c{i}"));
                prop_assert!((0.0..=1.0).contains(&wi));
                for (j, &hj) in hs.iter().enumerate() {
                    let wj = w.get(&format!("c{}", j));
                    if hi <= hj {
                        prop_assert!(wi >= wj);
                    }
                }
            }
            prop_assert!(w.iter().any(|(_, &v)| v == 1.0));
        }

        #[test]
        fn weights_are_log_base_invariant(hs in entropy_strategy(), base in 1.5f64..20.0) {
            let es: Vec<_> = hs.iter().enumerate().map(|(i, &v)| h(&format!("c{i}"), v)).collect();
            let rebased: Vec<_> = es.iter().map(|e| e.in_base(base)).collect();
            let a = tag_weights(&es);
            let b = tag_weights(&rebased);
            for (k, v) in a.iter() {
                prop_assert!((v - b.get(k)).abs() < 1e-12);
            }
        }

        #[test]
        fn entropy_invariant_under_permutation_and_duplication(
            picks in prop::collection::vec(prop::collection::vec(0usize..4, 1..10), 1..6),
            k in 1usize..4,
            rot in 0usize..6,
        ) {
            let colors = ["Red", "Blue", "Green", "Black"];
            let items: Vec<_> = colors.iter().map(|c| item(c, &[("Color", c)])).collect();
            let idx = index_annotations(&items);
            let hs: Vec<_> = picks
                .iter()
                .enumerate()
                .map(|(i, p)| hist(&format!("u{i}"), &p.iter().map(|&j| colors[j]).collect::<Vec<_>>()))
                .collect();
            let base = category_entropy(&hs, &idx, "Color").unwrap().value.unwrap();

            let mut permuted: Vec<_> = hs.iter().map(|h| {
                let mut h = h.clone();
                h.item_ids.reverse();
                h
            }).collect();
            let r = rot % permuted.len();
            permuted.rotate_left(r);
            let p = category_entropy(&permuted, &idx, "Color").unwrap().value.unwrap();
            prop_assert!((p - base).abs() < 1e-12);

            let dup: Vec<_> = hs.iter().map(|h| {
                let mut h = h.clone();
                h.item_ids = (0..k).flat_map(|_| h.item_ids.iter().cloned()).collect();
                h
            }).collect();
            let d = category_entropy(&dup, &idx, "Color").unwrap().value.unwrap();
            prop_assert!((d - base).abs() < 1e-12);
        }
    }
}
