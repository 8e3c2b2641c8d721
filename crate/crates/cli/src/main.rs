//! `pdfsift`: builds corpus artifacts, prints reports and launches the API.
//!
//! Exit status is 0 on success, 1 when the command line is invalid and 2 when
//! inputs are missing or malformed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pdfsift", version, about = "Index, characterize and rank archived PDF corpora")]
pub struct Cli {
    /// Worker threads (default: all logical cores). Output does not depend on it.
    #[arg(long, global = true, env = "PDFSIFT_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    /// Report format.
    #[arg(long, global = true, env = "PDFSIFT_FORMAT", value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scan a directory of PDFs into a manifest.
    Ingest(IngestArgs),
    /// Build the vocabulary and TF-IDF vectors from per-page text files.
    FeaturizeText(FeaturizeTextArgs),
    /// Compute built-in page features from rasters into an EMB1 store.
    FeaturizeVisual(FeaturizeVisualArgs),
    /// Convert externally computed page embeddings (JSON lines) into an EMB1 store.
    ImportEmbeddings(ImportArgs),
    /// Facet histograms and page totals of a manifest.
    Stats(StatsArgs),
    /// Top centroid terms per base URL.
    Terms(TermsArgs),
    /// k-means over TF-IDF vectors with per-cluster top terms.
    Cluster(ClusterArgs),
    /// 2-D t-SNE projection of store rows or TF-IDF vectors.
    Project(ProjectArgs),
    /// Serve the HTTP API over prepared artifacts.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct ManifestArg {
    #[arg(long, env = "PDFSIFT_MANIFEST")]
    pub manifest: PathBuf,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Directory of *.pdf files, optionally with .url sidecars.
    #[arg(long, env = "PDFSIFT_CORPUS_DIR")]
    pub corpus_dir: PathBuf,
    /// CDX index supplying source URLs and capture times.
    #[arg(long, env = "PDFSIFT_CDX")]
    pub cdx: Option<PathBuf>,
    /// Comma-separated CDX field names for files without a legend line
    /// (default: the classic 11-column layout).
    #[arg(long)]
    pub cdx_fields: Option<String>,
    /// Manifest to write.
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeaturizeTextArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// Text tree laid out as `<doc_id>/page-<n>.txt`.
    #[arg(long, env = "PDFSIFT_CORPUS_DIR")]
    pub corpus_dir: PathBuf,
    /// Directory receiving vocab.jsonl and tfidf.jsonl.
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: PathBuf,
    /// Drop terms found in fewer documents than this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub min_df: u32,
}

#[derive(Args, Debug)]
pub struct FeaturizeVisualArgs {
    /// Raster tree laid out as `<doc_id>/page-<n>.png`.
    #[arg(long, env = "PDFSIFT_CORPUS_DIR")]
    pub corpus_dir: PathBuf,
    /// Restrict to documents in this manifest.
    #[arg(long, env = "PDFSIFT_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// Store file to write.
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    /// JSON lines of `{doc_id, page_index, vector}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2048, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FacetArg {
    #[value(alias = "base_url")]
    BaseUrl,
    #[value(alias = "page_count", alias = "page_count_bucket")]
    PageCount,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// One facet only; both by default.
    #[arg(long, value_enum)]
    pub facet: Option<FacetArg>,
    /// Base-URL rows to print (all when omitted).
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TextFeaturesArg {
    /// Output directory of featurize-text.
    #[arg(long, env = "PDFSIFT_TEXT_FEATURES")]
    pub text_features: PathBuf,
}

#[derive(Args, Debug)]
pub struct TermsArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    #[command(flatten)]
    pub text: TextFeaturesArg,
    /// Report one base URL; otherwise the largest `--groups` base URLs.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub groups: usize,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Drop numbers, single characters and repeated stems.
    #[arg(long)]
    pub prune: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    #[command(flatten)]
    pub text: TextFeaturesArg,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[arg(long, env = "PDFSIFT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = pdfsift_core::analytics::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 10)]
    pub top_terms: usize,
    #[arg(long)]
    pub prune: bool,
    /// Only documents with this base URL.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Only documents in this page-count bucket.
    #[arg(long)]
    pub bucket: Option<String>,
    /// Also write the JSON report here.
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["store", "text_features"]))]
pub struct ProjectArgs {
    /// EMB1 store to project.
    #[arg(long, env = "PDFSIFT_STORE")]
    pub store: Option<PathBuf>,
    /// Project TF-IDF document vectors instead.
    #[arg(long)]
    pub text_features: Option<PathBuf>,
    /// Keep every page rather than front pages only.
    #[arg(long)]
    pub all_pages: bool,
    #[arg(long, env = "PDFSIFT_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "PDFSIFT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Refuse inputs with more rows unless `--sample` is given; exact t-SNE is quadratic.
    #[arg(long, default_value_t = pdfsift_core::projection::DESK_SCALE_ROWS)]
    pub max_rows: usize,
    /// Project a seeded random subset of this many rows.
    #[arg(long, value_parser = clap::value_parser!(u64).range(4..))]
    pub sample: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    #[arg(long, env = "PDFSIFT_TEXT_FEATURES")]
    pub text_features: Option<PathBuf>,
    #[arg(long, env = "PDFSIFT_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, env = "PDFSIFT_PROJECTION")]
    pub projection: Option<PathBuf>,
    #[arg(long, env = "PDFSIFT_RASTERS")]
    pub rasters: Option<PathBuf>,
    /// Persist labeling sessions here.
    #[arg(long, env = "PDFSIFT_SESSIONS")]
    pub sessions: Option<PathBuf>,
    #[arg(long, env = "PDFSIFT_BIND", default_value = pdfsift_service::DEFAULT_BIND)]
    pub bind: String,
    #[arg(long, env = "PDFSIFT_CLUSTER_ROW_CAP", default_value_t = 5_000)]
    pub cluster_row_cap: usize,
    #[arg(long, env = "PDFSIFT_L2_LAMBDA", default_value_t = pdfsift_core::learner::DEFAULT_L2_LAMBDA)]
    pub l2_lambda: f64,
    /// CORS origin allowed to call the API; repeatable. Any origin when omitted.
    #[arg(long = "allow-origin", env = "PDFSIFT_ALLOW_ORIGINS", value_delimiter = ',')]
    pub allow_origins: Vec<String>,
}

/// Failures after the command line parsed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.threads {
        Some(n) => pdfsift_core::par::with_threads(n as usize, || commands::run(&cli)),
        None => commands::run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
