use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

const ENV_HELP: &str = "\
Environment:
  LANGFAM_REGISTRY            registry TOML used when --registry is absent
  LANGFAM_EMBED_ENDPOINT      remote embeddings endpoint (OpenAI-style POST)
  LANGFAM_API_KEY             bearer token sent to the remote endpoint
  LANGFAM_EMBED_MODEL         remote model name
  LANGFAM_EMBED_DIM           remote embedding dimension
  LANGFAM_EMBED_TIMEOUT_SECS  remote request timeout (default 60)
  LANGFAM_CACHE_DIR           directory for embedding caches when --cache is absent

Exit codes:
  0 success, 1 other failure, 2 validation failure, 3 provider failure,
  4 internal invariant violation";

#[derive(Parser)]
#[command(name = "langfam", version, about = "Discover programming-language families from feature-aligned code corpora", after_help = ENV_HELP)]
struct Cli {
    /// Language registry (TOML); defaults to the built-in 19 + English.
    #[arg(long, global = true, env = "LANGFAM_REGISTRY")]
    registry: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prompt rendering, validation and statistics for corpora.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Embed a corpus and write per-language embeddings.
    Embed(EmbedArgs),
    /// Build the similarity matrix, statistics and heatmap.
    Similarity(SimilarityArgs),
    /// Ward clustering of a similarity matrix.
    Cluster(ClusterArgs),
    /// Transfer, curriculum and pivot plans.
    #[command(subcommand)]
    Plan(PlanCommand),
    /// Run the whole pipeline from a config file.
    Run(RunArgs),
    /// Render heatmap and dendrogram images from saved artifacts.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Print generation prompts.
    RenderPrompts {
        /// Features to render (e.g. F7); all when omitted.
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        /// Languages to request; all programming languages when omitted.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
        /// Snippets per language.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Also print the prompt for the reference language.
        #[arg(long)]
        reference: bool,
    },
    /// Check per-cell counts; exits 2 naming every violating cell.
    Validate {
        #[arg(required = true)]
        shards: Vec<PathBuf>,
        #[arg(long)]
        expect: usize,
        #[arg(long, default_value_t = 0.05)]
        duplicate_threshold: f64,
        /// Write the manifest JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample counts, length distribution and duplicate rates.
    Stats {
        #[arg(required = true)]
        shards: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ProviderArgs {
    /// `local` or `remote`.
    #[arg(long, default_value = "local")]
    provider: String,
    /// Embedding dimension (local default 512).
    #[arg(long)]
    dim: Option<usize>,
    /// Local embedder hash seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// `mean` or `concat`.
    #[arg(long, default_value = "mean")]
    aggregation: String,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(required = true)]
    shards: Vec<PathBuf>,
    /// Validate exact per-cell counts before embedding.
    #[arg(long)]
    expect: Option<usize>,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Output JSON with per-language embeddings.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimilarityArgs {
    /// Language embeddings written by `embed`.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Matrix CSV written by `similarity`.
    #[arg(long)]
    matrix: PathBuf,
    /// `one-minus-sim` or `euclidean`.
    #[arg(long, default_value = "one-minus-sim")]
    mode: String,
    /// Needed for `--mode euclidean`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// A fixed cluster count or `auto`.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long, requires = "k_max")]
    k_min: Option<usize>,
    #[arg(long, requires = "k_min")]
    k_max: Option<usize>,
    #[arg(long)]
    include_reference: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlanOutput {
    /// Matrix CSV written by `similarity`.
    #[arg(long)]
    matrix: PathBuf,
    /// Write the plan JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Rank high-resource languages as fine-tuning sources for a target.
    Transfer {
        #[arg(long)]
        target: String,
        #[command(flatten)]
        output: PlanOutput,
    },
    /// Order languages by similarity to a base language.
    Curriculum {
        #[arg(long)]
        base: String,
        /// `near-to-far`, `far-to-near` or `random`.
        #[arg(long, default_value = "near-to-far")]
        policy: String,
        /// Seed for the random policy; repeat for several orders.
        #[arg(long)]
        seed: Vec<u64>,
        /// Languages to order; all non-reference languages when omitted.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
        #[command(flatten)]
        output: PlanOutput,
    },
    /// Rank pivot languages for translating source into targets.
    Pivots {
        #[arg(long)]
        source: String,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// `centrality`, `target-mean` or `betweenness`.
        #[arg(long, default_value = "centrality")]
        scoring: String,
        #[arg(long)]
        include_source: bool,
        #[arg(long)]
        exclude_targets: bool,
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
        #[command(flatten)]
        output: PlanOutput,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `[provider] kind`.
    #[arg(long)]
    provider: Option<String>,
    /// Overrides `[provider] dim`.
    #[arg(long)]
    dim: Option<usize>,
    /// Overrides `[provider] cache`.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Overrides `[provider] batch_size`.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Overrides `[clustering] k`.
    #[arg(long)]
    k: Option<String>,
    /// Overrides `[clustering] mode`.
    #[arg(long)]
    mode: Option<String>,
    /// Overrides `expect_per_cell`.
    #[arg(long)]
    expect: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Dendrogram in tree-text form, as written by `cluster`.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Colour the dendrogram by cutting it into this many clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Dendrogram formats: tree-text, newick, dot, svg.
    #[arg(long, value_delimiter = ',', default_value = "svg")]
    formats: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
