//! Score reports laid out like the published results table, and
//! meta-correlation between columns of the bundled result fixtures.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::controls::{control_summary, random_embeddings, shuffle_assignment, ControlKind, ControlSummary};
use crate::error::{Error, Result};
use crate::ingest::{Fixture, CONTROL_MODELS};
use crate::simcore::{corr_embed, pearson, CorrEmbedOptions, CorrEmbedResult, EmbeddingSet, TagSet};

/// Offset between the seeds of the embedding-side and tag-side controls, so
/// the two never share a random stream.
const TAG_SEED_OFFSET: u64 = 0x9E37_79B9;

/// One cell: a single score, or the mean of several control seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub mean: f64,
    pub max_deviation: f64,
    pub scores: Vec<f64>,
}

impl Cell {
    fn single(score: f64) -> Cell {
        Cell { mean: score, max_deviation: 0.0, scores: vec![score] }
    }

    fn from_scores(scores: Vec<f64>) -> Cell {
        let s = ControlSummary::from_scores(ControlKind::RandomTags, Vec::new(), scores);
        Cell { mean: s.mean, max_deviation: s.max_deviation, scores: s.scores }
    }
}

/// Row of the report: which embeddings were scored, against four tag variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub configuration: String,
    pub corrembed: Cell,
    pub unweighted: Cell,
    pub random: Cell,
    pub shuffled: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub dataset: String,
    pub rows: Vec<ReportRow>,
    pub n_scored: usize,
    pub n_skipped: usize,
    pub wall_time_secs: f64,
    pub control_seeds: Vec<u64>,
    /// The weighted score of the real embeddings, per item if requested.
    pub result: CorrEmbedResult,
}

pub const TSV_HEADER: &str = "dataset\tconfiguration\tcorrembed\tunweighted\trandom\tshuffled";

impl ScoreReport {
    /// Deterministic table of cell means (no timings).
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                self.dataset, r.configuration, r.corrembed.mean, r.unweighted.mean, r.random.mean, r.shuffled.mean
            );
        }
        out
    }

    pub fn row(&self, configuration: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.configuration == configuration)
    }
}

/// Scores `images` against weighted, unweighted, random and shuffled tags,
/// for the real embeddings and for random and shuffled embeddings.
pub fn build_score_report(
    dataset: &str,
    images: &EmbeddingSet,
    weighted: &TagSet,
    unweighted: &TagSet,
    opts: &CorrEmbedOptions,
    control_seeds: &[u64],
) -> Result<ScoreReport> {
    if control_seeds.is_empty() {
        return Err(Error::InvalidInput("at least one control seed required".into()));
    }
    let start = Instant::now();
    let density = unweighted.density();
    let tag_seeds: Vec<u64> = control_seeds.iter().map(|s| s.wrapping_add(TAG_SEED_OFFSET)).collect();

    let score_row = |configuration: &str, imgs: &EmbeddingSet| -> Result<ReportRow> {
        let corrembed = corr_embed(imgs, weighted, opts)?.mean;
        let unweighted = corr_embed(imgs, unweighted, opts)?.mean;
        let random = control_summary(imgs, weighted, ControlKind::RandomTags, &tag_seeds, Some(density), opts)?;
        let shuffled = control_summary(imgs, weighted, ControlKind::ShuffleTags, &tag_seeds, None, opts)?;
        Ok(ReportRow {
            configuration: configuration.to_string(),
            corrembed: Cell::single(corrembed),
            unweighted: Cell::single(unweighted),
            random: Cell::from_scores(random.scores),
            shuffled: Cell::from_scores(shuffled.scores),
        })
    };

    let result = corr_embed(images, weighted, opts)?;
    let model = score_row("model", images)?;

    let mut control_rows = Vec::new();
    for (name, make) in [
        ("random", random_embeddings as fn(&EmbeddingSet, u64) -> EmbeddingSet),
        ("random shuffle", shuffle_assignment),
    ] {
        let per_seed = control_seeds
            .iter()
            .map(|&s| score_row(name, &make(images, s)))
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&ReportRow) -> &Cell| Cell::from_scores(per_seed.iter().map(|r| f(r).mean).collect());
        control_rows.push(ReportRow {
            configuration: name.to_string(),
            corrembed: col(|r| &r.corrembed),
            unweighted: col(|r| &r.unweighted),
            random: col(|r| &r.random),
            shuffled: col(|r| &r.shuffled),
        });
    }

    let mut rows = vec![model];
    rows.extend(control_rows);
    Ok(ScoreReport {
        dataset: dataset.to_string(),
        rows,
        n_scored: result.n_scored,
        n_skipped: result.n_skipped,
        wall_time_secs: start.elapsed().as_secs_f64(),
        control_seeds: control_seeds.to_vec(),
        result,
    })
}

/// The real score next to all four controls, each over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlReport {
    pub corrembed: f64,
    pub controls: Vec<ControlSummary>,
}

pub const CONTROL_TSV_HEADER: &str = "corrembed\trandom_embeddings\trandom_tags\tshuffle_embeddings\tshuffle_tags";

impl ControlReport {
    pub fn get(&self, kind: ControlKind) -> Option<&ControlSummary> {
        self.controls.iter().find(|c| c.kind == kind)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{CONTROL_TSV_HEADER}\n{:.6}", self.corrembed);
        for c in &self.controls {
            let _ = write!(out, "\t{:.6}", c.mean);
        }
        out.push('\n');
        out
    }
}

pub fn build_control_report(
    images: &EmbeddingSet,
    tags: &TagSet,
    density: Option<f64>,
    opts: &CorrEmbedOptions,
    seeds: &[u64],
) -> Result<ControlReport> {
    let corrembed = corr_embed(images, tags, opts)?.mean;
    let controls = ControlKind::ALL
        .iter()
        .map(|&k| control_summary(images, tags, k, seeds, density, opts))
        .collect::<Result<_>>()?;
    Ok(ControlReport { corrembed, controls })
}

/// Which rows and columns of a fixture to correlate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaCorrQuery {
    pub x: String,
    pub y: String,
    /// Models left out by name.
    pub exclude: BTreeSet<String>,
    /// Rows must have a numeric value in each of these columns.
    pub require: Vec<String>,
}

impl MetaCorrQuery {
    /// Control rows excluded by default.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        MetaCorrQuery {
            x: x.into(),
            y: y.into(),
            exclude: CONTROL_MODELS.iter().map(|s| s.to_string()).collect(),
            require: Vec::new(),
        }
    }

    pub fn including_controls(mut self) -> Self {
        self.exclude.retain(|m| !CONTROL_MODELS.contains(&m.as_str()));
        self
    }

    pub fn requiring(mut self, column: impl Into<String>) -> Self {
        self.require.push(column.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaCorr {
    pub x: String,
    pub y: String,
    pub value: f64,
    pub models: Vec<String>,
}

/// Pearson correlation between two numeric fixture columns over the rows
/// that survive exclusion and have values in every needed column.
pub fn meta_corr(fixture: &Fixture, query: &MetaCorrQuery) -> Result<MetaCorr> {
    let xi = fixture.column_index(&query.x)?;
    let yi = fixture.column_index(&query.y)?;
    let required = query
        .require
        .iter()
        .map(|c| fixture.column_index(c))
        .collect::<Result<Vec<_>>>()?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut models = Vec::new();
    for row in fixture.rows.iter().filter(|r| !query.exclude.contains(&r.model)) {
        if required.iter().any(|&c| fixture.numeric(row, c).is_none()) {
            continue;
        }
        if let (Some(x), Some(y)) = (fixture.numeric(row, xi), fixture.numeric(row, yi)) {
            xs.push(x);
            ys.push(y);
            models.push(row.model.clone());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!("meta-correlation needs >= 3 rows, got {}", xs.len())));
    }
    let value = pearson(&xs, &ys)?
        .ok_or_else(|| Error::Degenerate(format!("column {:?} or {:?} is constant", query.x, query.y)))?;
    Ok(MetaCorr { x: query.x.clone(), y: query.y.clone(), value, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> Fixture {
        Fixture::load("table2").unwrap()
    }

    #[test]
    fn identical_columns_correlate_perfectly() {
        let r = meta_corr(&t2(), &MetaCorrQuery::new("acc1", "acc1")).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_column_rejected() {
        let err = meta_corr(&t2(), &MetaCorrQuery::new("acc1", "top3")).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "top3"));
    }

    #[test]
    fn control_rows_excluded_by_default() {
        let r = meta_corr(&t2(), &MetaCorrQuery::new("acc1", "corrembed")).unwrap();
        assert_eq!(r.models.len(), 17);
        assert!(!r.models.iter().any(|m| m == "random"));
        let r = meta_corr(&t2(), &MetaCorrQuery::new("acc1", "corrembed").including_controls()).unwrap();
        assert_eq!(r.models.len(), 19);
    }

    /// Values recomputed independently from the transcribed tables.
    #[test]
    fn published_tables_reference_values() {
        let joined = t2().join(&Fixture::load("table3").unwrap());

        let all = meta_corr(&t2(), &MetaCorrQuery::new("acc1", "corrembed")).unwrap();
        assert!((all.value - 0.7961328170005699).abs() < 1e-9);

        let paired = meta_corr(&joined, &MetaCorrQuery::new("acc1", "corrembed").requiring("table3.corrembed")).unwrap();
        assert_eq!(paired.models.len(), 16);
        assert!((paired.value - 0.7670266917034838).abs() < 1e-9);

        let penultimate = meta_corr(&joined, &MetaCorrQuery::new("acc1", "table3.corrembed")).unwrap();
        assert!((penultimate.value - 0.7373917950938983).abs() < 1e-9);

        let across = meta_corr(&joined, &MetaCorrQuery::new("corrembed", "table3.corrembed")).unwrap();
        assert!((across.value - 0.9417818166126208).abs() < 1e-9);
    }

    #[test]
    fn too_few_rows() {
        let mut q = MetaCorrQuery::new("acc1", "corrembed");
        q.exclude.extend(t2().rows.iter().skip(4).map(|r| r.model.clone()));
        assert!(meta_corr(&t2(), &q).is_err());
    }
}
