//! Snippet embeddings, per-feature centroids and aggregated language vectors.

mod cache;
mod local;
mod remote;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::EmbeddingCache;
pub use local::LocalEmbedder;
pub use remote::{RemoteConfig, RemoteEmbedder};

use crate::corpus::{CodeSample, ContentHash, Corpus};
use crate::error::{Error, Result};
use crate::taxonomy::{FeatureId, LanguageRegistry};

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        EmbeddingVector::new(self.0.iter().map(|v| v * factor).collect())
    }

    /// Sequential-order dot product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        EmbeddingVector::new(v)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Provider name, model and dimensionality. Recorded in caches and
/// similarity outputs so results from different backends never mix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderIdentity {
    pub name: String,
    pub model: String,
    pub dim: usize,
}

impl fmt::Display for ProviderIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.name, self.model, self.dim)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderError {
    pub message: String,
    /// Whether repeating the same request can succeed.
    pub retryable: bool,
}

impl ProviderError {
    pub fn transient(message: impl Into<String>) -> Self {
        ProviderError { message: message.into(), retryable: true }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        ProviderError { message: message.into(), retryable: false }
    }
}

/// Embedding backend. Calls must be pure per input: the vector for a text
/// does not depend on what else is in the batch.
pub trait EmbeddingProvider: Sync {
    fn identity(&self) -> ProviderIdentity;

    fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { max_attempts: 1, initial_backoff: Duration::ZERO, max_backoff: Duration::ZERO }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedOptions {
    pub batch_size: usize,
    /// Upper bound on concurrently outstanding provider requests.
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions { batch_size: 64, max_in_flight: 4, retry: RetryPolicy::default() }
    }
}

enum BatchOutcome {
    Done(Vec<Vec<f64>>),
    Failed(ProviderError),
}

fn call_with_retry(provider: &dyn EmbeddingProvider, texts: &[&str], retry: &RetryPolicy) -> BatchOutcome {
    let attempts = retry.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        match provider.embed_batch(texts) {
            Ok(v) => return BatchOutcome::Done(v),
            Err(e) if e.retryable && attempt + 1 < attempts => {
                std::thread::sleep(retry.backoff(attempt));
                attempt += 1;
            }
            Err(e) => return BatchOutcome::Failed(e),
        }
    }
}

/// Embeds samples, consulting and filling `cache`. Identical texts are
/// requested once. Returns vectors aligned with `samples`.
///
/// Batches that succeed are written to the cache even if others fail.
pub fn embed_samples(
    provider: &dyn EmbeddingProvider,
    samples: &[CodeSample],
    cache: &mut EmbeddingCache,
    options: &EmbedOptions,
) -> Result<Vec<EmbeddingVector>> {
    let identity = provider.identity();
    if cache.identity() != &identity {
        return Err(Error::ProviderMismatch {
            expected: identity.to_string(),
            found: cache.identity().to_string(),
        });
    }
    let dim = identity.dim;

    let mut misses: Vec<(ContentHash, &str)> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for s in samples {
        if !cache.contains(&s.content_hash) && queued.insert(s.content_hash) {
            misses.push((s.content_hash, s.text.as_str()));
        }
    }

    if !misses.is_empty() {
        let batch_size = options.batch_size.max(1);
        let batches: Vec<&[(ContentHash, &str)]> = misses.chunks(batch_size).collect();
        let slots: Vec<Mutex<Option<BatchOutcome>>> = batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = options.max_in_flight.clamp(1, batches.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(batch) = batches.get(i) else { break };
                    let texts: Vec<&str> = batch.iter().map(|(_, t)| *t).collect();
                    let outcome = call_with_retry(provider, &texts, &options.retry);
                    *slots[i].lock().expect("slot lock") = Some(outcome);
                });
            }
        });

        let mut failed_hashes: Vec<ContentHash> = Vec::new();
        let mut last_error = None;
        let mut any_success = false;
        for (batch, slot) in batches.iter().zip(slots) {
            match slot.into_inner().expect("slot lock").expect("batch processed") {
                BatchOutcome::Done(vectors) => {
                    if vectors.len() != batch.len() {
                        return Err(Error::ProviderUnavailable(format!(
                            "provider returned {} vectors for a batch of {}",
                            vectors.len(),
                            batch.len()
                        )));
                    }
                    for ((hash, _), v) in batch.iter().zip(vectors) {
                        if v.len() != dim {
                            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
                        }
                        cache.insert(*hash, EmbeddingVector::new(v)?)?;
                    }
                    any_success = true;
                }
                BatchOutcome::Failed(e) => {
                    failed_hashes.extend(batch.iter().map(|(h, _)| *h));
                    last_error = Some(e);
                }
            }
        }
        cache.flush()?;
        if let Some(err) = last_error {
            if !any_success {
                return Err(Error::ProviderUnavailable(err.message));
            }
            let failed: std::collections::HashSet<ContentHash> = failed_hashes.into_iter().collect();
            return Err(Error::PartialFailure {
                failed: samples
                    .iter()
                    .filter(|s| failed.contains(&s.content_hash))
                    .map(CodeSample::key)
                    .collect(),
            });
        }
    }

    samples
        .iter()
        .map(|s| {
            cache
                .get(&s.content_hash)
                .cloned()
                .ok_or_else(|| Error::Invariant(format!("no vector for {}", s.key())))
        })
        .collect()
}

/// Component-wise arithmetic mean.
pub fn feature_centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = vectors.first().ok_or(Error::EmptyInput)?;
    let dim = first.dim();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
        }
        for (acc, x) in sum.iter_mut().zip(v.values()) {
            *acc += x;
        }
    }
    let n = vectors.len() as f64;
    EmbeddingVector::new(sum.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Unweighted mean of feature centroids.
    #[default]
    Mean,
    /// Centroids concatenated in feature-id order.
    Concat,
}

pub fn aggregate_language_embedding(
    centroids: &BTreeMap<FeatureId, EmbeddingVector>,
    mode: Aggregation,
) -> Result<EmbeddingVector> {
    let vectors: Vec<EmbeddingVector> = centroids.values().cloned().collect();
    match mode {
        Aggregation::Mean => feature_centroid(&vectors),
        Aggregation::Concat => {
            let first = vectors.first().ok_or(Error::EmptyInput)?;
            let dim = first.dim();
            let mut out = Vec::with_capacity(dim * vectors.len());
            for v in &vectors {
                if v.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
                }
                out.extend_from_slice(v.values());
            }
            EmbeddingVector::new(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageEmbedding {
    pub language: String,
    pub feature_centroids: BTreeMap<FeatureId, EmbeddingVector>,
    pub aggregate: EmbeddingVector,
}

/// Output of [`build_language_embeddings`], in registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageEmbeddings {
    pub provider: ProviderIdentity,
    pub aggregation: Aggregation,
    pub embeddings: Vec<LanguageEmbedding>,
    /// Languages whose centroid map lacks some registry features.
    pub missing_features: BTreeMap<String, Vec<FeatureId>>,
}

impl LanguageEmbeddings {
    pub fn get(&self, language: &str) -> Option<&LanguageEmbedding> {
        self.embeddings.iter().find(|e| e.language == language)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("embeddings serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn build_language_embeddings(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
    registry: &LanguageRegistry,
    cache: &mut EmbeddingCache,
    options: &EmbedOptions,
    aggregation: Aggregation,
) -> Result<LanguageEmbeddings> {
    let vectors = embed_samples(provider, corpus.samples(), cache, options)?;
    let mut cells: HashMap<(&str, FeatureId), Vec<EmbeddingVector>> = HashMap::new();
    for (s, v) in corpus.samples().iter().zip(vectors) {
        cells.entry((s.language.as_str(), s.feature)).or_default().push(v);
    }

    let mut embeddings = Vec::new();
    let mut missing_features = BTreeMap::new();
    for lang in registry.languages() {
        let mut centroids = BTreeMap::new();
        let mut missing = Vec::new();
        for feature in registry.feature_ids() {
            match cells.get(&(lang.name.as_str(), feature)) {
                Some(vs) => {
                    centroids.insert(feature, feature_centroid(vs)?);
                }
                None => missing.push(feature),
            }
        }
        if centroids.is_empty() {
            continue;
        }
        if !missing.is_empty() {
            missing_features.insert(lang.name.clone(), missing);
        }
        let aggregate = aggregate_language_embedding(&centroids, aggregation)?;
        embeddings.push(LanguageEmbedding { language: lang.name.clone(), feature_centroids: centroids, aggregate });
    }
    Ok(LanguageEmbeddings { provider: provider.identity(), aggregation, embeddings, missing_features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::load_registry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::AtomicUsize;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn vector_invariants() {
        assert!(matches!(EmbeddingVector::new(vec![]), Err(Error::EmptyInput)));
        assert!(matches!(EmbeddingVector::new(vec![1.0, f64::NAN]), Err(Error::NonFinite)));
        assert!(serde_json::from_str::<EmbeddingVector>("[]").is_err());
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(feature_centroid(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(), v(&[0.5, 0.5]));
        let x = v(&[0.3, -1.7, 2.5]);
        assert_eq!(feature_centroid(&[x.clone(), x.clone(), x.clone()]).unwrap(), x);
        assert!(matches!(feature_centroid(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            feature_centroid(&[v(&[1.0]), v(&[1.0, 2.0])]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn centroid_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vs: Vec<Vec<f64>> = (0..100).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // Oracle: explicit index loops, accumulate then divide.
        let mut oracle = [0.0f64; 8];
        for j in 0..8 {
            let mut acc = 0.0;
            for row in &vs {
                acc += row[j];
            }
            oracle[j] = acc / 100.0;
        }
        let got = feature_centroid(&vs.iter().map(|r| v(r)).collect::<Vec<_>>()).unwrap();
        for (g, o) in got.values().iter().zip(oracle) {
            assert!((g - o).abs() <= 1e-12);
        }
    }

    #[test]
    fn aggregate_examples() {
        let f1 = FeatureId::new(1).unwrap();
        let f2 = FeatureId::new(2).unwrap();
        let c = v(&[0.2, 0.4]);
        let single = BTreeMap::from([(f1, c.clone())]);
        assert_eq!(aggregate_language_embedding(&single, Aggregation::Mean).unwrap(), c);
        let two = BTreeMap::from([(f1, v(&[2.0, 0.0])), (f2, v(&[0.0, 2.0]))]);
        assert_eq!(aggregate_language_embedding(&two, Aggregation::Mean).unwrap(), v(&[1.0, 1.0]));
        assert_eq!(aggregate_language_embedding(&two, Aggregation::Concat).unwrap(), v(&[2.0, 0.0, 0.0, 2.0]));
        assert!(matches!(aggregate_language_embedding(&BTreeMap::new(), Aggregation::Mean), Err(Error::EmptyInput)));
    }

    #[test]
    fn aggregate_equals_centroid_of_centroids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map: BTreeMap<FeatureId, EmbeddingVector> = FeatureId::all()
            .map(|f| (f, v(&(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())))
            .collect();
        let list: Vec<_> = map.values().cloned().collect();
        assert_eq!(aggregate_language_embedding(&map, Aggregation::Mean).unwrap(), feature_centroid(&list).unwrap());
    }

    struct Counting<P> {
        inner: P,
        calls: AtomicUsize,
    }

    impl<P: EmbeddingProvider> EmbeddingProvider for Counting<P> {
        fn identity(&self) -> ProviderIdentity {
            self.inner.identity()
        }
        fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    struct Lying;
    impl EmbeddingProvider for Lying {
        fn identity(&self) -> ProviderIdentity {
            ProviderIdentity { name: "lying".into(), model: "m".into(), dim: 8 }
        }
        fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
            Ok(texts.iter().map(|_| vec![1.0; 7]).collect())
        }
    }

    /// Fails every batch containing the text "bad"; fails transiently once
    /// for batches containing "flaky".
    struct Picky {
        flaked: AtomicUsize,
    }
    impl EmbeddingProvider for Picky {
        fn identity(&self) -> ProviderIdentity {
            ProviderIdentity { name: "picky".into(), model: "m".into(), dim: 2 }
        }
        fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ProviderError> {
            if texts.contains(&"bad") {
                return Err(ProviderError::fatal("rejected"));
            }
            if texts.contains(&"flaky") && self.flaked.fetch_add(1, Ordering::SeqCst) == 0 {
                return Err(ProviderError::transient("503"));
            }
            Ok(texts.iter().map(|t| vec![t.len() as f64, 1.0]).collect())
        }
    }

    fn registry() -> LanguageRegistry {
        load_registry(
            "features = [\"F1\", \"F2\"]\n[[language]]\nname=\"Go\"\ntier=\"high\"\n[[language]]\nname=\"Java\"\ntier=\"high\"\n",
        )
        .unwrap()
    }

    fn fixture() -> Corpus {
        let f1 = FeatureId::new(1).unwrap();
        let f2 = FeatureId::new(2).unwrap();
        Corpus::from_texts(
            &registry(),
            [
                ("Go", f1, "x := 1"),
                ("Go", f1, "var y int"),
                ("Go", f2, "if a {}"),
                ("Go", f2, "switch b {}"),
                ("Java", f1, "int x = 1;"),
                ("Java", f1, "var y = 2;"),
                ("Java", f2, "if (a) {}"),
                ("Java", f2, "switch (b) {}"),
            ],
        )
        .unwrap()
    }

    fn no_retry(batch_size: usize) -> EmbedOptions {
        EmbedOptions { batch_size, max_in_flight: 3, retry: RetryPolicy::none() }
    }

    #[test]
    fn cached_samples_skip_provider() {
        let provider = Counting { inner: LocalEmbedder::new(16), calls: AtomicUsize::new(0) };
        let corpus = fixture();
        let samples = &corpus.samples()[..3];
        let mut cache = EmbeddingCache::in_memory(provider.identity());
        embed_samples(&provider, samples, &mut cache, &no_retry(2)).unwrap();
        let before = provider.calls.load(Ordering::SeqCst);
        let out = embed_samples(&provider, samples, &mut cache, &no_retry(2)).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(provider.calls.load(Ordering::SeqCst), before);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let corpus = fixture();
        let mut cache = EmbeddingCache::in_memory(Lying.identity());
        let err = embed_samples(&Lying, corpus.samples(), &mut cache, &no_retry(4)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 8, found: 7 }));
    }

    #[test]
    fn partial_failure_lists_samples_and_keeps_successes() {
        let reg = registry();
        let f1 = FeatureId::new(1).unwrap();
        let corpus = Corpus::from_texts(&reg, [("Go", f1, "good"), ("Go", f1, "bad"), ("Go", f1, "flaky")]).unwrap();
        let provider = Picky { flaked: AtomicUsize::new(0) };
        let mut cache = EmbeddingCache::in_memory(provider.identity());
        let opts = EmbedOptions {
            batch_size: 1,
            max_in_flight: 1,
            retry: RetryPolicy { max_attempts: 2, initial_backoff: Duration::ZERO, max_backoff: Duration::ZERO },
        };
        let err = embed_samples(&provider, corpus.samples(), &mut cache, &opts).unwrap_err();
        match err {
            Error::PartialFailure { failed } => assert_eq!(failed, vec!["Go/F1/1".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn unavailable_when_nothing_succeeds() {
        let reg = registry();
        let f1 = FeatureId::new(1).unwrap();
        let corpus = Corpus::from_texts(&reg, [("Go", f1, "bad")]).unwrap();
        let provider = Picky { flaked: AtomicUsize::new(0) };
        let mut cache = EmbeddingCache::in_memory(provider.identity());
        let err = embed_samples(&provider, corpus.samples(), &mut cache, &no_retry(8)).unwrap_err();
        assert!(matches!(err, Error::ProviderUnavailable(_)));
    }

    #[test]
    fn cache_from_other_provider_is_refused() {
        let corpus = fixture();
        let mut cache = EmbeddingCache::in_memory(Lying.identity());
        let err = embed_samples(&LocalEmbedder::new(8), corpus.samples(), &mut cache, &no_retry(4)).unwrap_err();
        assert!(matches!(err, Error::ProviderMismatch { .. }));
    }

    #[test]
    fn build_fixture_structure() {
        let reg = registry();
        let corpus = fixture();
        let provider = LocalEmbedder::new(32);
        let mut cache = EmbeddingCache::in_memory(provider.identity());
        let out = build_language_embeddings(&corpus, &provider, &reg, &mut cache, &no_retry(3), Aggregation::Mean).unwrap();
        assert_eq!(out.embeddings.len(), 2);
        assert!(out.embeddings.iter().all(|e| e.feature_centroids.len() == 2));
        assert!(out.missing_features.is_empty());

        let go_only = Corpus::from_texts(&reg, [("Go", FeatureId::new(1).unwrap(), "x := 1")]).unwrap();
        let out = build_language_embeddings(&go_only, &provider, &reg, &mut cache, &no_retry(3), Aggregation::Mean).unwrap();
        assert_eq!(out.embeddings.len(), 1);
        assert_eq!(out.embeddings[0].language, "Go");
        assert_eq!(out.missing_features["Go"], vec![FeatureId::new(2).unwrap()]);
    }

    proptest::proptest! {
        #[test]
        fn centroid_is_linear(
            rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 5), 1..20),
            alpha in 0.01f64..100.0,
        ) {
            let vs: Vec<_> = rows.iter().map(|r| v(r)).collect();
            let scaled: Vec<_> = vs.iter().map(|x| x.scaled(alpha).unwrap()).collect();
            let lhs = feature_centroid(&scaled).unwrap();
            let rhs = feature_centroid(&vs).unwrap().scaled(alpha).unwrap();
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn aggregation_ignores_feature_order(
            rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 2..21),
            rotate in 0usize..21,
        ) {
            let ids: Vec<FeatureId> = FeatureId::all().collect();
            let a: BTreeMap<_, _> = rows.iter().enumerate().map(|(i, r)| (ids[i], v(r))).collect();
            let k = rotate % rows.len();
            let b: BTreeMap<_, _> = rows.iter().enumerate().map(|(i, r)| (ids[(i + k) % rows.len()], v(r))).collect();
            let x = aggregate_language_embedding(&a, Aggregation::Mean).unwrap();
            let y = aggregate_language_embedding(&b, Aggregation::Mean).unwrap();
            for (p, q) in x.values().iter().zip(y.values()) {
                proptest::prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }
}
