//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test fails
//! if any criterion does.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use langfam::clustering::{DissimilaritySource, Dendrogram};
use langfam::embedding::EmbedOptions;
use langfam::pipeline::{files, run_pipeline, RunConfig};
use langfam::planner::{CurriculumPolicy, PivotOptions, PivotScoring};
use langfam::synth::{planted_corpus, planted_embeddings, PLANTED_FAMILY_SIZES};
use langfam::{
    adjusted_rand_index, build_similarity_matrix, cluster_languages, curriculum_order, cut_dendrogram,
    default_registry, embed_samples, ingest_corpus, normalized_cosine, rank_pivots, recommend_transfer_source,
    silhouette_score, similarity_stats, validate_corpus, ward_linkage, ClusterOptions, DissimilarityMatrix,
    EmbeddingCache, EmbeddingProvider, EmbeddingVector, LocalEmbedder, Partition, SimilarityMatrix,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

/// Children of one merge as leaf sets, and its height.
type MergeStep = (BTreeSet<usize>, BTreeSet<usize>, f64);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn vector(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}

fn random_nonzero(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        if v.iter().any(|x| x.abs() > 1e-3) {
            return v;
        }
    }
}

fn normalized_cosine_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 1e-9;
    for case in 0..10_000 {
        let dim = rng.random_range(2..=64);
        let a = random_nonzero(&mut rng, dim);
        let b = random_nonzero(&mut rng, dim);
        let (va, vb) = (vector(a.clone()), vector(b.clone()));
        let s = normalized_cosine(&va, &vb).map_err(|e| e.to_string())?;
        check!((0.0..=1.0).contains(&s), "case {case}: {s} outside [0, 1]");
        check!((s - normalized_cosine(&vb, &va).unwrap()).abs() <= tol, "case {case}: asymmetric");
        let (alpha, beta) = (rng.random_range(1e-3..1e3), rng.random_range(1e-3..1e3));
        let scaled = normalized_cosine(
            &vector(a.iter().map(|x| x * alpha).collect()),
            &vector(b.iter().map(|x| x * beta).collect()),
        )
        .unwrap();
        check!((s - scaled).abs() <= tol, "case {case}: not scale invariant ({s} vs {scaled})");
        check!((normalized_cosine(&va, &va).unwrap() - 1.0).abs() <= tol, "case {case}: self similarity != 1");
        let neg = vector(a.iter().map(|x| -x).collect());
        check!(normalized_cosine(&va, &neg).unwrap().abs() <= tol, "case {case}: antipodal != 0");
        // Gram-Schmidt gives a vector orthogonal to `a`.
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let aa: f64 = a.iter().map(|x| x * x).sum();
        let orth: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - dot / aa * x).collect();
        if orth.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-3 {
            let o = normalized_cosine(&va, &vector(orth)).unwrap();
            check!((o - 0.5).abs() <= tol, "case {case}: orthogonal gives {o}");
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("10000 pairs in {:?}", start.elapsed()))
}

/// Within-cluster error sum of squares for a general dissimilarity matrix.
fn ess(d: &[Vec<f64>], members: &[usize]) -> f64 {
    let mut s = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            s += d[i][j] * d[i][j];
        }
    }
    s / members.len() as f64
}

/// Merge sequence by brute force over the Ward objective. Returns `None`
/// when two candidate merges are too close to call.
fn naive_ward(d: &[Vec<f64>]) -> Option<Vec<MergeStep>> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut cands = Vec::new();
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let union: Vec<usize> = clusters[i].iter().chain(&clusters[j]).copied().collect();
                let delta = ess(d, &union) - ess(d, &clusters[i]) - ess(d, &clusters[j]);
                cands.push((delta, i, j));
            }
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0));
        if cands.len() > 1 && cands[1].0 - cands[0].0 < 1e-6 {
            return None;
        }
        let (delta, i, j) = cands[0];
        let b = clusters.remove(j);
        let a = clusters.remove(i);
        out.push((a.iter().copied().collect(), b.iter().copied().collect(), (2.0 * delta).sqrt()));
        clusters.push(a.into_iter().chain(b).collect());
    }
    Some(out)
}

fn random_instance(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(2..=7);
    if rng.random_bool(0.5) {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        (0..n)
            .map(|i| (0..n).map(|j| pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect())
            .collect()
    } else {
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(0.05..1.0);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }
}

fn tie_free_instances(count: usize) -> Vec<(Vec<Vec<f64>>, Vec<MergeStep>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < count {
        let d = random_instance(&mut rng);
        if let Some(seq) = naive_ward(&d) {
            out.push((d, seq));
        }
    }
    out
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("L{i}")).collect()
}

fn dendrogram_of(d: &[Vec<f64>]) -> Dendrogram {
    let m = DissimilarityMatrix::new(names(d.len()), d.to_vec(), DissimilaritySource::OneMinusSimilarity).unwrap();
    ward_linkage(&m).unwrap()
}

fn ward_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    for (case, (d, expected)) in tie_free_instances(100).into_iter().enumerate() {
        let dend = dendrogram_of(&d);
        for (step, (m, (a, b, h))) in dend.merges().iter().zip(&expected).enumerate() {
            let l: BTreeSet<usize> = dend.members(m.left).into_iter().collect();
            let r: BTreeSet<usize> = dend.members(m.right).into_iter().collect();
            check!(
                (l == *a && r == *b) || (l == *b && r == *a),
                "case {case} step {step}: merged {l:?}+{r:?}, oracle {a:?}+{b:?}"
            );
            check!((m.height - h).abs() <= 1e-9, "case {case} step {step}: height {} vs oracle {h}", m.height);
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("100 instances in {:?}", start.elapsed()))
}

fn dendrogram_laws() -> Outcome {
    let instances = tie_free_instances(100);
    let mut checked = 0;
    for (case, (d, _)) in instances.iter().enumerate() {
        let dend = dendrogram_of(d);
        let n = d.len();
        check!(dend.merges().windows(2).all(|w| w[0].height <= w[1].height), "case {case}: heights decrease");
        let cuts: Vec<Partition> = (1..=n).map(|k| cut_dendrogram(&dend, k).unwrap()).collect();
        check!(cuts[0].labels.iter().all(|&l| l == 0), "case {case}: k=1 cut is not one cluster");
        let mut last: Vec<usize> = cuts[n - 1].labels.clone();
        last.sort_unstable();
        last.dedup();
        check!(last.len() == n, "case {case}: k=n cut is not all singletons");
        for (k, p) in cuts.iter().enumerate() {
            check!(p.k() == k + 1, "case {case}: cut at {} has {} clusters", k + 1, p.k());
            for coarser in &cuts[..k] {
                check!(p.refines(coarser), "case {case}: cut at {} does not nest in a coarser cut", k + 1);
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} dendrograms"))
}

fn planted_partition_recovery() -> Outcome {
    let registry = default_registry();
    let mut worst = 1.0f64;
    let mut slowest = Duration::ZERO;
    for seed in 0..20 {
        let start = Instant::now();
        let planted = planted_embeddings(seed, 32, 0.2).map_err(|e| e.to_string())?;
        check!(planted.separation >= 5.0 * planted.spread, "seed {seed}: fixture not separated enough");
        let matrix = build_similarity_matrix(&planted.embeddings, None).unwrap();
        let (result, _) = cluster_languages(&matrix, &registry, &ClusterOptions::default(), None).map_err(|e| e.to_string())?;
        check!(result.k == 6, "seed {seed}: elbow picked k = {}", result.k);
        let found: Vec<usize> =
            planted.languages.iter().map(|l| result.partition.label_of(l).expect("clustered")).collect();
        let ari = adjusted_rand_index(&found, &planted.labels).unwrap();
        check!(ari >= 0.9, "seed {seed}: ARI {ari}");
        worst = worst.min(ari);
        slowest = slowest.max(start.elapsed());
    }
    within(slowest, Duration::from_secs(1))?;
    Ok(format!("20 seeds, k = 6, min ARI {worst}, slowest {slowest:?}"))
}

fn silhouette_correctness() -> Outcome {
    let d = DissimilarityMatrix::new(
        names(4),
        vec![
            vec![0.0, 1.0, 4.0, 5.0],
            vec![1.0, 0.0, 3.0, 4.0],
            vec![4.0, 3.0, 0.0, 2.0],
            vec![5.0, 4.0, 2.0, 0.0],
        ],
        DissimilaritySource::OneMinusSimilarity,
    )
    .unwrap();
    let s = silhouette_score(&d, &Partition::from_raw(names(4), &[0, 0, 1, 1])).unwrap();
    let hand = [3.5 / 4.5, 2.5 / 3.5, 1.5 / 3.5, 2.5 / 4.5];
    for (i, (got, want)) in s.per_item.iter().zip(hand).enumerate() {
        check!((got - want).abs() <= 1e-9, "item {i}: {got} vs {want}");
    }
    let mean = hand.iter().sum::<f64>() / 4.0;
    check!((s.overall - mean).abs() <= 1e-9, "overall {} vs {mean}", s.overall);

    let s = silhouette_score(&d, &Partition::from_raw(names(4), &[0, 0, 0, 1])).unwrap();
    check!(s.per_item[3] == 0.0, "singleton scored {}", s.per_item[3]);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let d = random_instance(&mut rng);
        let n = d.len();
        if n < 3 {
            continue;
        }
        let k = rng.random_range(2..n);
        let raw: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let m = DissimilarityMatrix::new(names(n), d, DissimilaritySource::OneMinusSimilarity).unwrap();
        let s = silhouette_score(&m, &Partition::from_raw(names(n), &raw)).unwrap();
        check!(s.per_item.iter().all(|v| (-1.0..=1.0).contains(v)), "case {case}: value outside [-1, 1]");
    }
    Ok(format!("overall {mean:.6}"))
}

/// Means over the other three programming languages: Go 0.39, Java 0.38,
/// Fortran 0.23, Haskell 0.17. English column mean 0.088.
fn centrality_matrix() -> SimilarityMatrix {
    let langs = ["Go", "Java", "Fortran", "Haskell", "English"].map(String::from).to_vec();
    let upper = [
        0.605, 0.33, 0.235, 0.146, //
        0.31, 0.225, 0.146, //
        0.05, 0.03, //
        0.03,
    ];
    SimilarityMatrix::from_upper(langs, &upper, None).unwrap()
}

fn centrality_fixture() -> Outcome {
    let registry = default_registry();
    let m = centrality_matrix();
    let stats = similarity_stats(&m, &registry).map_err(|e| e.to_string())?;
    for (lang, mean) in [("Go", 0.39), ("Java", 0.38), ("Fortran", 0.23), ("Haskell", 0.17)] {
        let got = stats.mean_of(lang).unwrap();
        check!((got - mean).abs() <= 1e-9, "{lang} mean {got} vs {mean}");
    }
    let reference = stats.reference.as_ref().ok_or("no reference column")?;
    check!((reference.mean - 0.088).abs() <= 1e-9, "English mean {}", reference.mean);
    check!(stats.centroid_language == "Go", "centroid {}", stats.centroid_language);
    let pivots = rank_pivots("Haskell", &[], &m, &registry, PivotScoring::Centrality, &PivotOptions::default())
        .map_err(|e| e.to_string())?;
    check!(pivots.ranked_pivots[0].language == "Go", "top pivot {}", pivots.ranked_pivots[0].language);
    Ok("centroid Go, top pivot Go".into())
}

const NEAR_TO_FAR: [&str; 10] =
    ["AppleScript", "Python", "Swift", "Kotlin", "JavaScript", "Go", "Rust", "Java", "C++", "Haskell"];

fn curriculum_fixture() -> Outcome {
    let registry = default_registry();
    let mut langs: Vec<String> = NEAR_TO_FAR.iter().map(|s| s.to_string()).collect();
    langs.push("English".into());
    let n = langs.len();
    let to_english = [0.31, 0.27, 0.22, 0.19, 0.16, 0.146, 0.12, 0.1, 0.07, 0.03];
    let mut values = vec![vec![0.4; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
    }
    for (i, v) in to_english.iter().enumerate() {
        values[i][n - 1] = *v;
        values[n - 1][i] = *v;
    }
    let m = SimilarityMatrix::new(langs.clone(), values, None).unwrap();
    // Input order scrambled so the result cannot echo it.
    let mut input: Vec<String> = langs[..n - 1].to_vec();
    input.sort();
    let plan = |policy, seed| curriculum_order("English", &input, &m, &registry, policy, seed).map_err(|e| e.to_string());
    let near = plan(CurriculumPolicy::NearToFar, None)?;
    check!(near.languages() == NEAR_TO_FAR, "near-to-far {:?}", near.languages());
    let far = plan(CurriculumPolicy::FarToNear, None)?;
    let reversed: Vec<&str> = NEAR_TO_FAR.iter().rev().copied().collect();
    check!(far.languages() == reversed, "far-to-near {:?}", far.languages());
    for seed in [1, 2, 3] {
        let a = plan(CurriculumPolicy::Random, Some(seed))?;
        let b = plan(CurriculumPolicy::Random, Some(seed))?;
        check!(a == b, "seed {seed} does not reproduce");
        let mut sorted = a.languages();
        sorted.sort_unstable();
        check!(sorted == input, "seed {seed} is not a permutation");
    }
    check!(
        plan(CurriculumPolicy::Random, Some(1))? != plan(CurriculumPolicy::Random, Some(2))?,
        "seeds 1 and 2 give the same order"
    );
    Ok("near-to-far and far-to-near exact, seeds reproduce".into())
}

fn transfer_fixture() -> Outcome {
    let registry = default_registry();
    let langs = ["Java", "Python", "Kotlin", "AppleScript"].map(String::from).to_vec();
    // Java-Python, Java-Kotlin, Java-AppleScript, Python-Kotlin, Python-AppleScript, Kotlin-AppleScript
    let m = SimilarityMatrix::from_upper(langs, &[0.5, 0.62, 0.35, 0.48, 0.57, 0.3], None).unwrap();
    let kotlin = recommend_transfer_source("Kotlin", &m, &registry).map_err(|e| e.to_string())?;
    check!(kotlin.chosen == "Java", "Kotlin → {}", kotlin.chosen);
    let apple = recommend_transfer_source("AppleScript", &m, &registry).map_err(|e| e.to_string())?;
    check!(apple.chosen == "Python", "AppleScript → {}", apple.chosen);
    Ok("Kotlin → Java, AppleScript → Python".into())
}

fn corpus_contract() -> Outcome {
    let registry = default_registry();
    let planted = planted_corpus(&registry, &PLANTED_FAMILY_SIZES, 100, 0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let corpus = ingest_corpus(planted.jsonl.as_bytes(), &registry).map_err(|e| e.to_string())?;
    let report = validate_corpus(&corpus, &registry, 100);
    let elapsed = start.elapsed();
    check!(report.is_valid(), "balanced corpus has {} violations", report.violations.len());
    check!(report.manifest.total == 20 * 21 * 100, "total {}", report.manifest.total);
    check!(report.manifest.programming_total == 39_900, "programming total {}", report.manifest.programming_total);
    for lang in registry.programming_languages() {
        let n: usize = registry.feature_ids().map(|f| report.manifest.count(&lang.name, f)).sum();
        check!(n == 2_100, "{} has {n} samples", lang.name);
    }
    within(elapsed, Duration::from_secs(5))?;

    let first = corpus.samples()[0].clone();
    let rest: String = planted.jsonl.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let short = ingest_corpus(rest.as_bytes(), &registry).map_err(|e| e.to_string())?;
    let violations = validate_corpus(&short, &registry, 100).violations;
    check!(violations.len() == 1, "{} violations after one deletion", violations.len());
    let cell = format!("{}/{}", first.language, first.feature);
    check!(violations[0].to_string().starts_with(&cell), "violation `{}` does not name {cell}", violations[0]);
    Ok(format!("42000 samples validated in {elapsed:?}; deletion reported as `{}`", violations[0]))
}

fn write_run_fixture(dir: &Path) -> RunConfig {
    let planted = planted_corpus(&default_registry(), &PLANTED_FAMILY_SIZES, 3, 17).unwrap();
    std::fs::write(dir.join("corpus.jsonl"), &planted.jsonl).unwrap();
    let text = "corpus = \"corpus.jsonl\"\nexpect_per_cell = 3\nout_dir = \"a\"\n\n[provider]\ndim = 4096\n";
    RunConfig::from_toml(text, dir).unwrap()
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_run_fixture(dir.path());
    run_pipeline(&config).map_err(|e| e.to_string())?;
    config.out_dir = dir.path().join("b");
    run_pipeline(&config).map_err(|e| e.to_string())?;
    let compared = [files::MATRIX_CSV, files::MATRIX_JSON, files::TREE, files::NEWICK, files::DOT, files::DENDROGRAM_SVG, files::PARTITION];
    for name in compared {
        let a = std::fs::read(dir.path().join("a").join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.path().join("b").join(name)).map_err(|e| e.to_string())?;
        check!(a == b, "{name} differs between runs");
    }
    Ok(format!("{} artifacts identical", compared.len()))
}

fn embedding_cache() -> Outcome {
    let registry = default_registry();
    let planted = planted_corpus(&registry, &PLANTED_FAMILY_SIZES, 2, 4).unwrap();
    let corpus = ingest_corpus(planted.jsonl.as_bytes(), &registry).unwrap();
    let provider = LocalEmbedder::new(256);
    let run = |batch_size| {
        let mut cache = EmbeddingCache::in_memory(provider.identity());
        let options = EmbedOptions { batch_size, ..EmbedOptions::default() };
        let vectors = embed_samples(&provider, corpus.samples(), &mut cache, &options).unwrap();
        (vectors, cache)
    };
    let (one, _) = run(1);
    let (many, cache) = run(64);
    check!(one.len() == many.len(), "different lengths");
    for (i, (a, b)) in one.iter().zip(&many).enumerate() {
        let same = a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
        check!(same, "sample {i} differs between batch 1 and batch 64");
    }

    let decoded = EmbeddingCache::decode(&cache.encode()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.bin");
    let mut on_disk = EmbeddingCache::open(&path, provider.identity()).map_err(|e| e.to_string())?;
    for (h, v) in cache.entries() {
        on_disk.insert(*h, v.clone()).map_err(|e| e.to_string())?;
    }
    on_disk.flush().map_err(|e| e.to_string())?;
    let reloaded = EmbeddingCache::load(&path).map_err(|e| e.to_string())?;
    for copy in [&decoded, &reloaded] {
        check!(copy.len() == cache.len(), "entry count {} vs {}", copy.len(), cache.len());
        check!(copy.identity() == cache.identity(), "identity changed");
        for (h, v) in cache.entries() {
            let got = copy.get(h).ok_or("entry lost")?;
            let same = got.values().iter().zip(v.values()).all(|(x, y)| x.to_bits() == y.to_bits());
            check!(same && got.dim() == v.dim(), "vector changed in round trip");
        }
    }
    Ok(format!("{} vectors bit-exact, batch 1 == batch 64", cache.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 11] = [
        ("normalized cosine properties", normalized_cosine_properties),
        ("ward oracle equivalence", ward_oracle_equivalence),
        ("dendrogram laws", dendrogram_laws),
        ("planted partition recovery", planted_partition_recovery),
        ("silhouette correctness", silhouette_correctness),
        ("centrality fixture", centrality_fixture),
        ("curriculum fixture", curriculum_fixture),
        ("transfer fixture", transfer_fixture),
        ("corpus contract", corpus_contract),
        ("end-to-end determinism", end_to_end_determinism),
        ("embedding cache", embedding_cache),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
