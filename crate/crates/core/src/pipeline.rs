//! End-to-end run: validate → embed → similarity → cluster → plans, with
//! artifacts staged and then promoted into the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{adjusted_rand_index, cluster_languages, ClusterOptions, DissimilarityMode, KSelection};
use crate::corpus::{ingest_shards, validate_corpus_with_threshold, Corpus, CorpusManifest};
use crate::embedding::{
    build_language_embeddings, Aggregation, EmbedOptions, EmbeddingCache, EmbeddingProvider, LanguageEmbeddings,
    LocalEmbedder, ProviderIdentity, RemoteConfig, RemoteEmbedder,
};
use crate::error::{Error, Result};
use crate::planner::{
    curriculum_order, rank_pivots, recommend_transfer_source, CurriculumPolicy, PivotOptions, PivotScoring,
};
use crate::report::{heatmap_svg, render_dendrogram, DendrogramFormat, PlanSet, RunManifest, RunReport};
use crate::similarity::{build_similarity_matrix, matrix_json, similarity_stats, SimilarityMatrix};
use crate::taxonomy::{default_registry, load_registry, LanguageRegistry};

/// Directory for embedding caches when none is configured.
pub const ENV_CACHE_DIR: &str = "LANGFAM_CACHE_DIR";

pub const DEFAULT_LOCAL_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl OneOrMany {
    pub fn paths(&self) -> Vec<PathBuf> {
        match self {
            OneOrMany::One(p) => vec![p.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Local,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Embedding dimension; the local embedder defaults to 512, the remote
    /// one to the environment setting.
    pub dim: Option<usize>,
    /// Local embedder hash seed.
    pub seed: u64,
    pub cache: Option<PathBuf>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub aggregation: Aggregation,
    /// Remote overrides for the environment settings.
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let e = EmbedOptions::default();
        ProviderConfig {
            kind: ProviderKind::Local,
            dim: None,
            seed: 0,
            cache: None,
            batch_size: e.batch_size,
            max_in_flight: e.max_in_flight,
            aggregation: Aggregation::Mean,
            endpoint: None,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(usize),
    /// `"auto"`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    /// `one-minus-sim` (default) or `euclidean`.
    pub mode: Option<String>,
    /// A fixed count or `"auto"`.
    pub k: Option<KSpec>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub include_reference: bool,
    /// Known family label per language; the report then includes the
    /// adjusted Rand index against it.
    pub expected: BTreeMap<String, String>,
}

impl ClusteringConfig {
    pub fn options(&self) -> Result<ClusterOptions> {
        let mode = match &self.mode {
            Some(m) => m.parse::<DissimilarityMode>()?,
            None => DissimilarityMode::OneMinusSimilarity,
        };
        let k = match (&self.k, self.k_min, self.k_max) {
            (Some(KSpec::Fixed(k)), None, None) => KSelection::Fixed(*k),
            (Some(KSpec::Fixed(_)), _, _) => {
                return Err(Error::InvalidConfig("`k` cannot be combined with `k_min`/`k_max`".into()))
            }
            (Some(KSpec::Named(s)), None, None) if s == "auto" => KSelection::Auto,
            (Some(KSpec::Named(s)), _, _) if s != "auto" => {
                return Err(Error::InvalidConfig(format!("`k` must be a number or \"auto\", got `{s}`")))
            }
            (_, None, None) => KSelection::Auto,
            (_, Some(lo), Some(hi)) => KSelection::Elbow { k_min: lo, k_max: hi },
            _ => return Err(Error::InvalidConfig("`k_min` and `k_max` must be given together".into())),
        };
        Ok(ClusterOptions { mode, k, include_reference: self.include_reference, ..Default::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferRequest {
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumRequest {
    pub base: String,
    pub policy: String,
    /// Defaults to every non-reference language other than `base`.
    #[serde(default)]
    pub languages: Option<Vec<String>>,
    /// One plan per seed under the random policy.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotRequest {
    pub source: String,
    pub targets: Vec<String>,
    #[serde(default)]
    pub scoring: Option<String>,
    #[serde(default)]
    pub include_source: bool,
    #[serde(default)]
    pub exclude_targets: bool,
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlansConfig {
    pub transfer: Vec<TransferRequest>,
    pub curriculum: Vec<CurriculumRequest>,
    pub pivots: Vec<PivotRequest>,
}

/// Run configuration. Relative paths are resolved against the directory of
/// the config file.
///
/// ```toml
/// corpus = "corpus.jsonl"          # or a list of shards
/// expect_per_cell = 100
/// out_dir = "out"
///
/// [provider]
/// kind = "local"
/// dim = 512
///
/// [clustering]
/// k = "auto"
///
/// [[plans.transfer]]
/// target = "Kotlin"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub registry: Option<PathBuf>,
    #[serde(default)]
    pub corpus: Option<OneOrMany>,
    /// Language embeddings written by an earlier `embed`, used instead of a
    /// corpus.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub expect_per_cell: Option<usize>,
    #[serde(default)]
    pub duplicate_threshold: Option<f64>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub plans: PlansConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        if let Some(p) = cfg.registry.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.embeddings.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.provider.cache.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.out_dir);
        cfg.corpus = cfg.corpus.map(|c| {
            OneOrMany::Many(
                c.paths()
                    .into_iter()
                    .map(|mut p| {
                        rebase(&mut p);
                        p
                    })
                    .collect(),
            )
        });
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn registry(&self) -> Result<LanguageRegistry> {
        match &self.registry {
            Some(p) => load_registry(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => Ok(default_registry()),
        }
    }
}

/// Builds the configured embedding provider.
pub fn make_provider(cfg: &ProviderConfig) -> Result<Box<dyn EmbeddingProvider>> {
    match cfg.kind {
        ProviderKind::Local => {
            let dim = cfg.dim.unwrap_or(DEFAULT_LOCAL_DIM);
            if dim == 0 {
                return Err(Error::InvalidConfig("provider dimension must be positive".into()));
            }
            Ok(Box::new(LocalEmbedder::with_seed(dim, cfg.seed)))
        }
        ProviderKind::Remote => {
            let rc = RemoteConfig::from_env_with(cfg.endpoint.clone(), cfg.model.clone(), cfg.dim)?;
            Ok(Box::new(RemoteEmbedder::new(rc).map_err(|e| Error::ProviderUnavailable(e.to_string()))?))
        }
    }
}

/// Explicit path, else a per-provider file under `$LANGFAM_CACHE_DIR`, else
/// no persistent cache.
pub fn cache_path(explicit: Option<&Path>, identity: &ProviderIdentity) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let dir = std::env::var_os(ENV_CACHE_DIR).filter(|d| !d.is_empty())?;
    let stem: String = identity
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    Some(PathBuf::from(dir).join(format!("{stem}.bin")))
}

pub fn open_cache(explicit: Option<&Path>, identity: ProviderIdentity) -> Result<EmbeddingCache> {
    match cache_path(explicit, &identity) {
        Some(p) => EmbeddingCache::open(p, identity),
        None => Ok(EmbeddingCache::in_memory(identity)),
    }
}

/// Validates a corpus against exact per-cell counts, failing with the list of
/// violating cells.
pub fn validated_corpus(
    paths: &[PathBuf],
    registry: &LanguageRegistry,
    expect_per_cell: usize,
    duplicate_threshold: f64,
) -> Result<(Corpus, CorpusManifest)> {
    let corpus = ingest_shards(paths, registry)?;
    let report = validate_corpus_with_threshold(&corpus, registry, expect_per_cell, duplicate_threshold);
    match report.into_result() {
        Ok(m) => Ok((corpus, m)),
        Err(v) => Err(Error::CorpusInvalid(v.iter().map(|v| v.to_string()).collect())),
    }
}

/// File names written into the output directory.
pub mod files {
    pub const MATRIX_CSV: &str = "matrix.csv";
    pub const MATRIX_JSON: &str = "matrix.json";
    pub const EMBEDDINGS: &str = "embeddings.json";
    pub const TREE: &str = "dendrogram.tree";
    pub const NEWICK: &str = "dendrogram.nwk";
    pub const DOT: &str = "dendrogram.dot";
    pub const DENDROGRAM_SVG: &str = "dendrogram.svg";
    pub const PARTITION: &str = "partition.json";
    pub const HEATMAP: &str = "heatmap.svg";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_MD: &str = "report.md";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn build_plans(cfg: &PlansConfig, matrix: &SimilarityMatrix, registry: &LanguageRegistry) -> Result<PlanSet> {
    let mut plans = PlanSet::default();
    for t in &cfg.transfer {
        plans.transfer.push(recommend_transfer_source(&t.target, matrix, registry)?);
    }
    for c in &cfg.curriculum {
        let policy: CurriculumPolicy = c.policy.parse()?;
        let languages = c.languages.clone().unwrap_or_else(|| default_curriculum_languages(&c.base, matrix, registry));
        if policy == CurriculumPolicy::Random {
            if c.seeds.is_empty() {
                return Err(Error::MissingSeed);
            }
            for &seed in &c.seeds {
                plans.curriculum.push(curriculum_order(&c.base, &languages, matrix, registry, policy, Some(seed))?);
            }
        } else {
            plans.curriculum.push(curriculum_order(&c.base, &languages, matrix, registry, policy, None)?);
        }
    }
    for p in &cfg.pivots {
        let scoring = match &p.scoring {
            Some(s) => s.parse()?,
            None => PivotScoring::default(),
        };
        let opts = PivotOptions {
            exclude_source: !p.include_source,
            exclude_targets: p.exclude_targets,
            candidates: p.candidates.clone(),
        };
        plans.pivots.push(rank_pivots(&p.source, &p.targets, matrix, registry, scoring, &opts)?);
    }
    Ok(plans)
}

/// Non-reference languages of `matrix` other than `base`, in matrix order.
pub fn default_curriculum_languages(base: &str, matrix: &SimilarityMatrix, registry: &LanguageRegistry) -> Vec<String> {
    matrix
        .languages()
        .iter()
        .filter(|l| !registry.is_reference(l) && !l.eq_ignore_ascii_case(base))
        .cloned()
        .collect()
}

/// Runs every stage and writes the artifacts. Any failure aborts with the
/// stage name; nothing is promoted into `out_dir` unless all stages succeed.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutcome> {
    let started_at = now();
    let registry = stage("validate", config.registry())?;
    let mut manifest = RunManifest::new(&registry);

    let (corpus_manifest, embeddings) = match (&config.corpus, &config.embeddings) {
        (Some(corpus), None) => {
            let expect = config.expect_per_cell.ok_or_else(|| {
                Error::InvalidConfig("`expect_per_cell` is required with `corpus`".into()).in_stage("validate")
            })?;
            let threshold = config.duplicate_threshold.unwrap_or(crate::corpus::DEFAULT_DUPLICATE_THRESHOLD);
            let (corpus, cm) = stage("validate", validated_corpus(&corpus.paths(), &registry, expect, threshold))?;
            manifest.corpus_digest = Some(corpus.digest());
            let provider = stage("embed", make_provider(&config.provider))?;
            let mut cache = stage("embed", open_cache(config.provider.cache.as_deref(), provider.identity()))?;
            let options = EmbedOptions {
                batch_size: config.provider.batch_size,
                max_in_flight: config.provider.max_in_flight,
                ..Default::default()
            };
            let emb = stage(
                "embed",
                build_language_embeddings(
                    &corpus,
                    provider.as_ref(),
                    &registry,
                    &mut cache,
                    &options,
                    config.provider.aggregation,
                ),
            )?;
            (Some(cm), emb)
        }
        (None, Some(path)) => {
            let text = stage("embed", std::fs::read_to_string(path).map_err(|e| Error::io(path, e)))?;
            (None, stage("embed", LanguageEmbeddings::from_json(&text))?)
        }
        _ => {
            return Err(Error::InvalidConfig("set exactly one of `corpus` and `embeddings`".into()).in_stage("validate"))
        }
    };
    manifest.provider = Some(embeddings.provider.clone());

    let matrix = stage(
        "similarity",
        build_similarity_matrix(&embeddings.embeddings, Some(embeddings.provider.to_string())),
    )?;
    let stats = stage("similarity", similarity_stats(&matrix, &registry))?;
    manifest.matrix_digest = Some(matrix.digest());

    let options = stage("cluster", config.clustering.options())?;
    let (clustering, tree) = stage("cluster", cluster_languages(&matrix, &registry, &options, Some(&embeddings)))?;
    manifest.clustering = Some(options);
    let expected_ari = if config.clustering.expected.is_empty() {
        None
    } else {
        Some(stage("cluster", expected_agreement(&config.clustering.expected, &clustering.partition))?)
    };

    let plans = stage("plans", build_plans(&config.plans, &matrix, &registry))?;

    let digest = manifest.digest();
    let d = Some(digest.as_str());
    let report = RunReport {
        manifest_digest: digest.clone(),
        corpus: corpus_manifest,
        similarity: stats.clone(),
        clustering: clustering.clone(),
        expected_ari,
        plans,
    };
    let partition = &clustering.partition;
    let mut artifacts: Vec<(&str, String)> = vec![
        (files::MATRIX_CSV, matrix.to_csv(d)),
        (files::MATRIX_JSON, matrix_json(&matrix, Some(&stats), d) + "\n"),
        (files::EMBEDDINGS, embeddings.to_json() + "\n"),
        (files::TREE, render_dendrogram(&tree, Some(partition), DendrogramFormat::TreeText, d)),
        (files::NEWICK, render_dendrogram(&tree, Some(partition), DendrogramFormat::Newick, d)),
        (files::DOT, render_dendrogram(&tree, Some(partition), DendrogramFormat::Dot, d)),
        (files::DENDROGRAM_SVG, render_dendrogram(&tree, Some(partition), DendrogramFormat::Svg, d)),
        (files::PARTITION, partition.to_json(d)),
        (files::HEATMAP, heatmap_svg(&matrix, &registry, d)),
        (files::REPORT_JSON, report.to_json()),
        (files::REPORT_MD, report.to_markdown()),
    ];
    manifest.started_at = Some(started_at);
    manifest.finished_at = Some(now());
    artifacts.push((files::MANIFEST, manifest.to_json()));

    let written = stage("write", promote(&config.out_dir, &artifacts))?;
    Ok(RunOutcome { manifest, report, out_dir: config.out_dir.clone(), files: written })
}

fn expected_agreement(expected: &BTreeMap<String, String>, partition: &crate::clustering::Partition) -> Result<f64> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut truth = Vec::with_capacity(partition.leaves.len());
    for leaf in &partition.leaves {
        let label = expected
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(leaf))
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::InvalidConfig(format!("no expected family for `{leaf}`")))?;
        let next = ids.len();
        truth.push(*ids.entry(label).or_insert(next));
    }
    adjusted_rand_index(&truth, &partition.labels)
}

/// Writes every artifact into a staging directory inside `out_dir`, then
/// renames each into place. The manifest goes last.
pub fn promote(out_dir: &Path, artifacts: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let staging = out_dir.join(format!(".staging-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    std::fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
    let result = (|| {
        for (name, body) in artifacts {
            let p = staging.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        let mut out = Vec::with_capacity(artifacts.len());
        for (name, _) in artifacts {
            let (from, to) = (staging.join(name), out_dir.join(name));
            std::fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
            out.push(to);
        }
        Ok(out)
    })();
    let _ = std::fs::remove_dir_all(&staging);
    result
}
