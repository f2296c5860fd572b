use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use langfam::clustering::{cut_dendrogram, KSelection};
use langfam::corpus::{corpus_stats, ingest_shards, render_reference_prompt, validate_corpus_with_threshold, Corpus};
use langfam::embedding::{build_language_embeddings, EmbedOptions, LanguageEmbeddings};
use langfam::error::ErrorClass;
use langfam::pipeline::{
    default_curriculum_languages, files, make_provider, open_cache, run_pipeline, ClusteringConfig, KSpec,
    ProviderConfig, ProviderKind, RunConfig,
};
use langfam::planner::{
    curriculum_order, rank_pivots, recommend_transfer_source, CurriculumPolicy, PivotOptions, PivotScoring,
};
use langfam::report::{emit_dendrogram, emit_heatmap, render_dendrogram, write_artifact, DendrogramFormat};
use langfam::similarity::{build_similarity_matrix, matrix_json, similarity_stats};
use langfam::taxonomy::{feature, load_registry, FeatureId};
use langfam::{
    cluster_languages, default_registry, render_generation_prompt, Dendrogram, Error, LanguageRegistry,
    SimilarityMatrix,
};
use serde::Serialize;

use super::{
    ClusterArgs, Cli, Command, CorpusCommand, EmbedArgs, PlanCommand, PlanOutput, ProviderArgs, ReportArgs, RunArgs,
    SimilarityArgs,
};

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()).map(Error::class) {
        Some(ErrorClass::Validation) => 2,
        Some(ErrorClass::Provider) => 3,
        Some(ErrorClass::Invariant) => 4,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn registry(path: Option<&Path>) -> Result<LanguageRegistry> {
    match path {
        Some(p) => Ok(load_registry(&read(p)?).with_context(|| format!("loading registry {}", p.display()))?),
        None => Ok(default_registry()),
    }
}

fn load_matrix(path: &Path) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_csv(&read(path)?).with_context(|| format!("reading matrix {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let registry = registry(cli.registry.as_deref())?;
    match cli.command {
        Command::Corpus(c) => corpus(c, &registry),
        Command::Embed(a) => embed(a, &registry),
        Command::Similarity(a) => similarity(a, &registry),
        Command::Cluster(a) => cluster(a, &registry),
        Command::Plan(p) => plan(p, &registry),
        Command::Run(a) => run(a, cli.registry),
        Command::Report(a) => report(a, &registry),
    }
}

fn corpus(cmd: CorpusCommand, registry: &LanguageRegistry) -> Result<()> {
    match cmd {
        CorpusCommand::RenderPrompts { features, languages, samples, reference } => {
            let ids: Vec<FeatureId> = if features.is_empty() {
                registry.feature_ids().collect()
            } else {
                features.iter().map(|f| f.parse()).collect::<langfam::Result<_>>()?
            };
            let langs = if languages.is_empty() {
                registry.programming_languages().collect::<Vec<_>>()
            } else {
                languages
                    .iter()
                    .map(|l| registry.get(l).ok_or_else(|| Error::UnknownLanguage(l.clone())))
                    .collect::<langfam::Result<_>>()?
            };
            let mut out = Vec::new();
            for id in ids {
                let f = feature(id);
                out.push(render_generation_prompt(&f, &langs, samples)?);
                if reference {
                    let r = registry.reference().ok_or(Error::ReferenceLanguageMissing)?;
                    out.push(render_reference_prompt(&f, r, samples)?);
                }
            }
            print!("{}", out.join("\n"));
            Ok(())
        }
        CorpusCommand::Validate { shards, expect, duplicate_threshold, out } => {
            let corpus = ingest_shards(&shards, registry)?;
            let report = validate_corpus_with_threshold(&corpus, registry, expect, duplicate_threshold);
            let m = &report.manifest;
            println!(
                "{} samples ({} programming) in {} cells; duplicate rate {:.4}; {} cell(s) over threshold {}",
                m.total,
                m.programming_total,
                m.cells.len(),
                m.duplicate_rate,
                m.flagged_cells.len(),
                m.duplicate_threshold
            );
            if let Some(p) = out {
                write_artifact(&p, &to_json(&report))?;
            }
            match report.into_result() {
                Ok(_) => Ok(()),
                Err(violations) => {
                    for v in &violations {
                        eprintln!("  {v}");
                    }
                    Err(Error::CorpusInvalid(violations.iter().map(ToString::to_string).collect()).into())
                }
            }
        }
        CorpusCommand::Stats { shards } => {
            let corpus = ingest_shards(&shards, registry)?;
            print!("{}", to_json(&corpus_stats(&corpus)));
            Ok(())
        }
    }
}

fn provider_config(a: &ProviderArgs) -> Result<ProviderConfig> {
    let kind = match a.provider.as_str() {
        "local" => ProviderKind::Local,
        "remote" => ProviderKind::Remote,
        other => return Err(Error::InvalidArgument(format!("unknown provider `{other}`")).into()),
    };
    let aggregation = serde_json::from_value(serde_json::Value::String(a.aggregation.clone()))
        .map_err(|_| Error::InvalidArgument(format!("unknown aggregation `{}`", a.aggregation)))?;
    Ok(ProviderConfig {
        kind,
        dim: a.dim,
        seed: a.seed,
        cache: a.cache.clone(),
        batch_size: a.batch_size,
        max_in_flight: a.max_in_flight,
        aggregation,
        ..Default::default()
    })
}

fn load_corpus(shards: &[PathBuf], registry: &LanguageRegistry, expect: Option<usize>) -> Result<Corpus> {
    match expect {
        Some(n) => Ok(langfam::pipeline::validated_corpus(shards, registry, n, langfam::corpus::DEFAULT_DUPLICATE_THRESHOLD)?.0),
        None => Ok(ingest_shards(shards, registry)?),
    }
}

fn embed(a: EmbedArgs, registry: &LanguageRegistry) -> Result<()> {
    let corpus = load_corpus(&a.shards, registry, a.expect)?;
    let cfg = provider_config(&a.provider)?;
    let provider = make_provider(&cfg)?;
    let mut cache = open_cache(cfg.cache.as_deref(), provider.identity())?;
    let options = EmbedOptions { batch_size: cfg.batch_size, max_in_flight: cfg.max_in_flight, ..Default::default() };
    let emb = build_language_embeddings(&corpus, provider.as_ref(), registry, &mut cache, &options, cfg.aggregation)?;
    write_artifact(&a.out, &(emb.to_json() + "\n"))?;
    println!(
        "embedded {} samples for {} languages with {}; cache holds {} vectors",
        corpus.len(),
        emb.embeddings.len(),
        emb.provider,
        cache.len()
    );
    for (lang, missing) in &emb.missing_features {
        let ids: Vec<String> = missing.iter().map(ToString::to_string).collect();
        eprintln!("warning: {lang} has no samples for {}", ids.join(", "));
    }
    Ok(())
}

fn similarity(a: SimilarityArgs, registry: &LanguageRegistry) -> Result<()> {
    let emb = LanguageEmbeddings::from_json(&read(&a.embeddings)?)?;
    let matrix = build_similarity_matrix(&emb.embeddings, Some(emb.provider.to_string()))?;
    let stats = similarity_stats(&matrix, registry)?;
    write_artifact(&a.out_dir.join(files::MATRIX_CSV), &matrix.to_csv(None))?;
    write_artifact(&a.out_dir.join(files::MATRIX_JSON), &(matrix_json(&matrix, Some(&stats), None) + "\n"))?;
    emit_heatmap(&matrix, registry, &a.out_dir.join(files::HEATMAP), None)?;
    let mut means = stats.mean_similarity.clone();
    means.sort_by(|x, y| y.value.total_cmp(&x.value));
    println!("centroid language: {}", stats.centroid_language);
    for v in means {
        println!("  {:<14} {:.4}", v.language, v.value);
    }
    if let Some(r) = &stats.reference {
        println!("mean similarity to {}: {:.4}", r.reference, r.mean);
    }
    Ok(())
}

fn k_spec(k: &str) -> KSpec {
    k.parse().map(KSpec::Fixed).unwrap_or_else(|_| KSpec::Named(k.to_string()))
}

fn cluster(a: ClusterArgs, registry: &LanguageRegistry) -> Result<()> {
    let matrix = load_matrix(&a.matrix)?;
    let embeddings = a.embeddings.as_deref().map(|p| read(p).and_then(|t| Ok(LanguageEmbeddings::from_json(&t)?))).transpose()?;
    let opts = ClusteringConfig {
        mode: Some(a.mode),
        k: a.k_min.is_none().then(|| k_spec(&a.k)),
        k_min: a.k_min,
        k_max: a.k_max,
        include_reference: a.include_reference,
        ..Default::default()
    }
    .options()?;
    let (result, tree) = cluster_languages(&matrix, registry, &opts, embeddings.as_ref())?;
    let p = &result.partition;
    for (fmt, name) in [
        (DendrogramFormat::TreeText, files::TREE),
        (DendrogramFormat::Newick, files::NEWICK),
        (DendrogramFormat::Dot, files::DOT),
        (DendrogramFormat::Svg, files::DENDROGRAM_SVG),
    ] {
        emit_dendrogram(&tree, Some(p), &a.out_dir.join(name), fmt, None)?;
    }
    write_artifact(&a.out_dir.join(files::PARTITION), &p.to_json(None))?;
    write_artifact(&a.out_dir.join("clustering.json"), &to_json(&result))?;
    print!("k = {}", result.k);
    if let Some(s) = &result.silhouette {
        print!(", silhouette {:.4}", s.overall);
    }
    if matches!(opts.k, KSelection::Auto | KSelection::Elbow { .. }) {
        print!(" (elbow)");
    }
    println!();
    for (i, members) in result.per_cluster.iter().enumerate() {
        println!("  {}: {}", i + 1, members.join(", "));
    }
    Ok(())
}

fn emit_plan<T: Serialize>(output: &PlanOutput, plan: &T, table: String) -> Result<()> {
    let json = to_json(plan);
    if let Some(p) = &output.out {
        write_artifact(p, &json)?;
    }
    if output.json {
        print!("{json}");
    } else {
        print!("{table}");
    }
    Ok(())
}

fn plan(cmd: PlanCommand, registry: &LanguageRegistry) -> Result<()> {
    match cmd {
        PlanCommand::Transfer { target, output } => {
            let m = load_matrix(&output.matrix)?;
            let r = recommend_transfer_source(&target, &m, registry)?;
            emit_plan(&output, &r, r.to_table())
        }
        PlanCommand::Curriculum { base, policy, seed, languages, output } => {
            let m = load_matrix(&output.matrix)?;
            let policy: CurriculumPolicy = policy.parse()?;
            let langs = if languages.is_empty() { default_curriculum_languages(&base, &m, registry) } else { languages };
            let plans = if policy == CurriculumPolicy::Random {
                if seed.is_empty() {
                    return Err(Error::MissingSeed.into());
                }
                seed.iter()
                    .map(|&s| curriculum_order(&base, &langs, &m, registry, policy, Some(s)))
                    .collect::<langfam::Result<Vec<_>>>()?
            } else {
                vec![curriculum_order(&base, &langs, &m, registry, policy, None)?]
            };
            let table: String = plans.iter().map(|p| p.to_table()).collect::<Vec<_>>().join("\n");
            if plans.len() == 1 {
                emit_plan(&output, &plans[0], table)
            } else {
                emit_plan(&output, &plans, table)
            }
        }
        PlanCommand::Pivots { source, targets, scoring, include_source, exclude_targets, candidates, output } => {
            let m = load_matrix(&output.matrix)?;
            let scoring: PivotScoring = scoring.parse()?;
            let opts = PivotOptions {
                exclude_source: !include_source,
                exclude_targets,
                candidates: (!candidates.is_empty()).then_some(candidates),
            };
            let r = rank_pivots(&source, &targets, &m, registry, scoring, &opts)?;
            emit_plan(&output, &r, r.to_table())
        }
    }
}

fn run(a: RunArgs, registry_flag: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if registry_flag.is_some() {
        cfg.registry = registry_flag;
    }
    if let Some(o) = a.out_dir {
        cfg.out_dir = o;
    }
    if let Some(p) = a.provider {
        cfg.provider.kind = match p.as_str() {
            "local" => ProviderKind::Local,
            "remote" => ProviderKind::Remote,
            other => return Err(Error::InvalidArgument(format!("unknown provider `{other}`")).into()),
        };
    }
    if a.dim.is_some() {
        cfg.provider.dim = a.dim;
    }
    if a.cache.is_some() {
        cfg.provider.cache = a.cache;
    }
    if let Some(b) = a.batch_size {
        cfg.provider.batch_size = b;
    }
    if let Some(k) = a.k {
        cfg.clustering.k = Some(k_spec(&k));
        cfg.clustering.k_min = None;
        cfg.clustering.k_max = None;
    }
    if a.mode.is_some() {
        cfg.clustering.mode = a.mode;
    }
    if a.expect.is_some() {
        cfg.expect_per_cell = a.expect;
    }
    let outcome = run_pipeline(&cfg)?;
    let c = &outcome.report.clustering;
    print!("k = {}", c.k);
    if let Some(s) = &c.silhouette {
        print!(", silhouette {:.4}", s.overall);
    }
    if let Some(ari) = outcome.report.expected_ari {
        print!(", ARI vs expected {ari:.4}");
    }
    println!("\ncentroid language: {}", outcome.report.similarity.centroid_language);
    println!("manifest {}", outcome.manifest.digest());
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    Ok(())
}

fn report(a: ReportArgs, registry: &LanguageRegistry) -> Result<()> {
    let matrix = load_matrix(&a.matrix)?;
    emit_heatmap(&matrix, registry, &a.out_dir.join(files::HEATMAP), None)?;
    let Some(tree_path) = a.tree else {
        if a.k.is_some() {
            return Err(Error::InvalidArgument("--k needs --tree".into()).into());
        }
        return Ok(());
    };
    let tree = Dendrogram::parse_tree_text(&read(&tree_path)?)?;
    let partition = a.k.map(|k| cut_dendrogram(&tree, k)).transpose()?;
    for f in &a.formats {
        let fmt: DendrogramFormat = f.parse()?;
        let path = a.out_dir.join(format!("dendrogram.{}", fmt.extension()));
        write_artifact(&path, &render_dendrogram(&tree, partition.as_ref(), fmt, None))?;
    }
    Ok(())
}
