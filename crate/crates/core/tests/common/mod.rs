//! Reference implementations written straight from the textbook formulas,
//! sharing no code with the library's scoring path.
#![allow(dead_code)]

use corrembed::VectorSet;

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..a.len() {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// `None` when either side has (numerically) zero spread.
pub fn naive_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    for j in 0..x.len() {
        num += (x[j] - mx) * (y[j] - my);
        dx2 += (x[j] - mx).powi(2);
        dy2 += (y[j] - my).powi(2);
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread(x) == 0.0 || spread(y) == 0.0 {
        return None;
    }
    Some(num / (dx2.sqrt() * dy2.sqrt()))
}

/// Single-threaded double loop over all items, self-pairs excluded.
/// Returns per-item correlations and their mean.
pub fn naive_corr_embed(images: &VectorSet, tags: &VectorSet) -> (Vec<Option<f64>>, f64) {
    let n = images.len();
    let mut per_item = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = Vec::with_capacity(n - 1);
        let mut y = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            x.push(naive_cosine(tags.row(i), tags.row(j)));
            y.push(naive_cosine(images.row(i), images.row(j)));
        }
        per_item.push(naive_pearson(&x, &y));
    }
    let defined: Vec<f64> = per_item.iter().flatten().copied().collect();
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    (per_item, mean)
}

/// Deterministic pseudo-random matrix without touching the library's RNG use.
pub fn lcg_matrix(n: usize, d: usize, seed: u64, binary: bool) -> VectorSet {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let start = data.len();
        for _ in 0..d {
            let v = next();
            data.push(if binary { f64::from(v < 0.3) } else { v - 0.3 });
        }
        if binary && data[start..].iter().all(|&v| v == 0.0) {
            data[start] = 1.0;
        }
    }
    VectorSet::new((0..n).map(|i| format!("it{i:04}")).collect(), d, data).unwrap()
}
