use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corrembed::controls::seed_series;
use corrembed::ingest::{self, Fixture};
use corrembed::report::{build_control_report, build_score_report, meta_corr, MetaCorrQuery};
use corrembed::retrieval::top_k;
use corrembed::simcore::Sample;
use corrembed::synthgen::{generate, EmbeddingMap, SynthSpec};
use corrembed::tagspace::{align_annotations, default_dropped, encode_all};
use corrembed::weighting::{category_entropies, index_annotations, tag_weights_with, Normalization, WeightOptions};
use corrembed::{build_vocabulary, CategoryWeights, CorrEmbedOptions, EmbeddingSet, Error, Result, TagSet};

#[derive(Parser)]
#[command(name = "corrembed", version, about = "Score image embeddings against tag annotations")]
struct Cli {
    /// Seed for sampling, controls and synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Keep each item's similarity to itself in its profile.
    #[arg(long, global = true)]
    include_self: bool,
    /// Number of query items to score, or "all".
    #[arg(long, global = true, default_value = "all")]
    sample: Sample,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score embeddings with weighted and unweighted tags plus controls.
    Score(ScoreArgs),
    /// Compute per-category weights from rental histories.
    Weights(WeightsArgs),
    /// Score against all four randomized controls.
    Controls(ControlsArgs),
    /// Nearest neighbours of one item by cosine similarity.
    Neighbors(NeighborsArgs),
    /// Write a synthetic dataset with a known tag-embedding relationship.
    Synth(SynthArgs),
    /// Pearson correlation between two columns of a result table.
    MetaCorr(MetaCorrArgs),
    /// Dump embeddings as TSV (id then values) for external projection tools.
    #[command(name = "export-2d")]
    Export2d(ExportArgs),
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Binary embedding file.
    #[arg(long, requires = "ids", conflicts_with = "csv")]
    embeddings: Option<PathBuf>,
    /// Item ids, one per line, in row order.
    #[arg(long)]
    ids: Option<PathBuf>,
    /// CSV embeddings with rows `id,v1,...,vd`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl EmbeddingArgs {
    fn load(&self) -> Result<EmbeddingSet> {
        match (&self.embeddings, &self.ids, &self.csv) {
            (Some(e), Some(ids), None) => ingest::read_embeddings(e, ids),
            (None, _, Some(csv)) => ingest::read_embeddings_csv(csv),
            _ => Err(Error::InvalidInput("pass --embeddings with --ids, or --csv".into())),
        }
    }

    fn label(&self) -> String {
        self.embeddings
            .as_ref()
            .or(self.csv.as_ref())
            .and_then(|p| p.file_stem())
            .map_or_else(|| "embeddings".into(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Args)]
struct TagArgs {
    /// Item annotations (JSONL).
    #[arg(long, alias = "tags")]
    annotations: PathBuf,
    /// Rental histories (JSONL) used to derive category weights.
    #[arg(long, conflicts_with = "weights")]
    histories: Option<PathBuf>,
    /// Precomputed category weights (JSON object).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Categories left out of the tag space. Defaults to the size categories.
    #[arg(long = "drop", value_name = "CATEGORY")]
    dropped: Vec<String>,
    /// Keep every category.
    #[arg(long, conflicts_with = "dropped")]
    keep_all: bool,
    /// Minimum weight after normalization.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    /// Normalize by the largest entropy a category could have instead of the observed range.
    #[arg(long)]
    theoretical_max: bool,
}

struct Tags {
    weighted: TagSet,
    unweighted: TagSet,
    weights: Option<CategoryWeights>,
}

impl TagArgs {
    fn dropped(&self) -> BTreeSet<String> {
        if self.keep_all {
            BTreeSet::new()
        } else if self.dropped.is_empty() {
            default_dropped()
        } else {
            self.dropped.iter().cloned().collect()
        }
    }

    /// Tag sets aligned with `item_ids`. Weights are required unless `allow_unweighted`.
    fn load(&self, item_ids: &[String], allow_unweighted: bool) -> Result<Tags> {
        let annotations = ingest::read_annotations(&self.annotations)?;
        let weights = self.weights_for(&annotations)?;
        if weights.is_none() && !allow_unweighted {
            return Err(Error::InvalidInput("weights need --histories or --weights (or pass --unweighted)".into()));
        }
        let aligned = align_annotations(&annotations, item_ids)?;
        let vocab = build_vocabulary(&aligned, &self.dropped())?;
        Ok(Tags {
            weighted: encode_all(&aligned, &vocab, weights.as_ref())?,
            unweighted: encode_all(&aligned, &vocab, None)?,
            weights,
        })
    }

    fn weights_for(&self, annotations: &[corrembed::ItemAnnotation]) -> Result<Option<CategoryWeights>> {
        if let Some(path) = &self.weights {
            return ingest::read_weights(path).map(Some);
        }
        let Some(path) = &self.histories else { return Ok(None) };
        let histories = ingest::read_histories(path)?;
        let vocab = build_vocabulary(annotations, &self.dropped())?;
        let entropies = category_entropies(&histories, &index_annotations(annotations), &vocab)?;
        for e in &entropies {
            log::info!("entropy {}: {:?} over {} customers", e.category, e.value, e.customers_counted);
        }
        let normalization = if self.theoretical_max {
            Normalization::TheoreticalMax(vocab.category_sizes())
        } else {
            Normalization::Observed
        };
        Ok(Some(tag_weights_with(&entropies, &WeightOptions { floor: self.floor, normalization })))
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[command(flatten)]
    tags: TagArgs,
    /// Score with unit weights only.
    #[arg(long)]
    unweighted: bool,
    /// Seeds per control.
    #[arg(long, default_value_t = 3)]
    control_seeds: usize,
    /// Dataset name in the report (default: embedding file name).
    #[arg(long)]
    label: Option<String>,
    /// Write the TSV table here instead of stdout.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Include per-item correlations in the JSON report.
    #[arg(long)]
    per_item: bool,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    tags: TagArgs,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ControlsArgs {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[command(flatten)]
    tags: TagArgs,
    #[arg(long)]
    unweighted: bool,
    /// Seeds per control.
    #[arg(long, default_value_t = 3)]
    control_seeds: usize,
    /// Density of random tags (default: density of the real tags).
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NeighborsArgs {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long = "num-tags", default_value_t = 24)]
    tags: usize,
    #[arg(long, default_value_t = 4)]
    categories: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Standard deviation of the Gaussian noise added to each embedding value.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 40)]
    customers: usize,
    #[arg(long, default_value_t = 15)]
    rentals: usize,
    /// Use the weighted tag vectors themselves as embeddings.
    #[arg(long)]
    identity: bool,
}

#[derive(Args)]
struct MetaCorrArgs {
    /// Bundled table name (table2, table3) or a TSV path.
    #[arg(long, default_value = "table2")]
    fixture: String,
    /// Second table, inner-joined on model name; its columns get a `NAME.` prefix.
    #[arg(long)]
    join: Option<String>,
    #[arg(long, default_value = "acc1")]
    x: String,
    #[arg(long, default_value = "corrembed")]
    y: String,
    /// Model to leave out (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
    /// Also report the value with the control rows included.
    #[arg(long)]
    include: bool,
    /// Keep only rows with a value in this column (repeatable).
    #[arg(long)]
    require: Vec<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long)]
    out: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => ingest::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let opts = CorrEmbedOptions { sample: cli.sample, seed: cli.seed, include_self: cli.include_self, threads: None };

    match cli.command {
        Command::Score(a) => {
            let images = a.embeddings.load()?;
            let tags = a.tags.load(images.item_ids(), a.unweighted)?;
            let weighted = if a.unweighted { &tags.unweighted } else { &tags.weighted };
            let label = a.label.clone().unwrap_or_else(|| a.embeddings.label());
            let seeds = seed_series(cli.seed, a.control_seeds);
            let mut report = build_score_report(&label, &images, weighted, &tags.unweighted, &opts, &seeds)?;
            log::info!(
                "scored {} items ({} skipped) in {:.3}s",
                report.n_scored,
                report.n_skipped,
                report.wall_time_secs
            );
            if !a.per_item {
                report.result.per_item.clear();
            }
            let json = match &a.json {
                Some(_) => {
                    let weights = if a.unweighted { None } else { tags.weights.as_ref() };
                    let value = serde_json::json!({ "report": report, "weights": weights });
                    Some(serde_json::to_string_pretty(&value)? + "\n")
                }
                None => None,
            };
            emit(a.tsv.as_deref(), &report.to_tsv())?;
            if let (Some(path), Some(json)) = (&a.json, json) {
                ingest::write_atomic(path, json.as_bytes())?;
            }
        }
        Command::Weights(a) => {
            let annotations = ingest::read_annotations(&a.tags.annotations)?;
            let weights = a
                .tags
                .weights_for(&annotations)?
                .ok_or_else(|| Error::InvalidInput("pass --histories or --weights".into()))?;
            let text = serde_json::to_string_pretty(&weights)? + "\n";
            emit(a.out.as_deref(), &text)?;
        }
        Command::Controls(a) => {
            let images = a.embeddings.load()?;
            let tags = a.tags.load(images.item_ids(), a.unweighted)?;
            let weighted = if a.unweighted { &tags.unweighted } else { &tags.weighted };
            let density = a.density.or(Some(tags.unweighted.density()));
            let seeds = seed_series(cli.seed, a.control_seeds);
            let report = build_control_report(&images, weighted, density, &opts, &seeds)?;
            emit(a.out.as_deref(), &report.to_tsv())?;
        }
        Command::Neighbors(a) => {
            let images = a.embeddings.load()?;
            let list = top_k(&images, &a.query, a.k)?;
            emit(a.out.as_deref(), &list.to_tsv())?;
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                n: a.n,
                tags: a.tags,
                categories: a.categories,
                dim: a.dim,
                noise: a.noise,
                seed: cli.seed,
                customers: a.customers,
                rentals_per_customer: a.rentals,
                map: if a.identity { EmbeddingMap::Identity } else { EmbeddingMap::Orthonormal },
            };
            generate(&spec)?.write_to(&a.out)?;
        }
        Command::MetaCorr(a) => {
            let mut fixture = Fixture::load(&a.fixture)?;
            if let Some(other) = &a.join {
                fixture = fixture.join(&Fixture::load(other)?);
            }
            for name in a.exclude.iter().filter(|n| !fixture.rows.iter().any(|r| &r.model == *n)) {
                log::warn!("--exclude {name:?} matches no model");
            }
            let mut query = MetaCorrQuery::new(&a.x, &a.y);
            query.exclude.extend(a.exclude.iter().cloned());
            query.require = a.require.clone();
            let mut queries = vec![("excluded", query.clone())];
            if a.include {
                queries.push(("included", query.including_controls()));
            }
            let mut out = String::from("x\ty\tcontrols\trows\tpearson\n");
            for (controls, q) in queries {
                let m = meta_corr(&fixture, &q)?;
                out.push_str(&format!("{}\t{}\t{controls}\t{}\t{:.6}\n", m.x, m.y, m.models.len(), m.value));
            }
            print!("{out}");
        }
        Command::Export2d(a) => {
            let images = a.embeddings.load()?;
            ingest::write_atomic(&a.out, ingest::format_embeddings_tsv(&images).as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
