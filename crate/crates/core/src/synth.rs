//! Seeded synthetic fixtures with planted family structure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{EmbeddingVector, LanguageEmbedding};
use crate::error::{Error, Result};
use crate::taxonomy::{FeatureId, LanguageRegistry, STUDIED_LANGUAGES};

/// Family sizes used for 19 languages.
pub const PLANTED_FAMILY_SIZES: [usize; 6] = [4, 6, 3, 2, 2, 2];

/// Shuffles `languages` with `rng` and deals them into families of the given
/// sizes. Returns `language → family`.
fn assign_families(languages: &[String], sizes: &[usize], rng: &mut ChaCha8Rng) -> Result<BTreeMap<String, usize>> {
    if sizes.iter().sum::<usize>() != languages.len() || sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "family sizes {sizes:?} do not partition {} languages",
            languages.len()
        )));
    }
    let mut shuffled = languages.to_vec();
    shuffled.shuffle(rng);
    let mut out = BTreeMap::new();
    let mut it = shuffled.into_iter();
    for (f, &s) in sizes.iter().enumerate() {
        for lang in it.by_ref().take(s) {
            out.insert(lang, f);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedEmbeddings {
    pub languages: Vec<String>,
    /// Family index per language.
    pub labels: Vec<usize>,
    pub embeddings: Vec<LanguageEmbedding>,
    /// Largest distance of a member from its family center.
    pub spread: f64,
    /// Smallest distance between two family centers.
    pub separation: f64,
}

/// Language embeddings for the 19 studied languages. Family `f` is centered
/// on the unit basis vector `e_f`, so centers are `√2` apart; each member is
/// offset in a random direction by at most `max_offset`.
pub fn planted_embeddings(seed: u64, dim: usize, max_offset: f64) -> Result<PlantedEmbeddings> {
    let sizes = PLANTED_FAMILY_SIZES;
    if dim < sizes.len() {
        return Err(Error::InvalidArgument(format!("dimension {dim} cannot hold {} families", sizes.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let languages: Vec<String> = STUDIED_LANGUAGES.iter().map(|s| s.to_string()).collect();
    let families = assign_families(&languages, &sizes, &mut rng)?;
    let mut labels = Vec::new();
    let mut embeddings = Vec::new();
    let mut spread = 0.0f64;
    for lang in &languages {
        let f = families[lang];
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let r = max_offset * rng.random::<f64>();
        dir.iter_mut().for_each(|x| *x *= r / norm);
        spread = spread.max(r);
        dir[f] += 1.0;
        let v = EmbeddingVector::new(dir)?;
        labels.push(f);
        embeddings.push(LanguageEmbedding {
            language: lang.clone(),
            feature_centroids: BTreeMap::from([(FeatureId::new(1)?, v.clone())]),
            aggregate: v,
        });
    }
    Ok(PlantedEmbeddings { languages, labels, embeddings, spread, separation: std::f64::consts::SQRT_2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    /// One JSON record per line.
    pub jsonl: String,
    /// Family index per programming language.
    pub families: BTreeMap<String, usize>,
}

/// Letters split into disjoint alphabets, one per vocabulary group, so that
/// different groups share no character trigrams.
const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn alphabet(group: usize, groups: usize) -> &'static [u8] {
    let width = LETTERS.len() / groups;
    &LETTERS[group * width..(group + 1) * width]
}

fn vocab(rng: &mut ChaCha8Rng, letters: &[u8], n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(5..=8);
            (0..len).map(|_| letters[rng.random_range(0..letters.len())] as char).collect()
        })
        .collect()
}

/// Corpus of `per_cell` samples for every `(language, feature)` cell of
/// `registry`. Programming languages are dealt into families of `sizes`.
/// Samples draw most of their tokens from a family vocabulary and a few
/// from a per-language one, all spelled with the family's own letters, so
/// character-level embedders recover the families. The reference language
/// gets an alphabet of its own.
pub fn planted_corpus(registry: &LanguageRegistry, sizes: &[usize], per_cell: usize, seed: u64) -> Result<PlantedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let programming: Vec<String> = registry.programming_languages().map(|l| l.name.clone()).collect();
    let families = assign_families(&programming, sizes, &mut rng)?;
    let groups = sizes.len() + 1;
    if LETTERS.len() / groups < 3 {
        return Err(Error::InvalidArgument(format!("too many families ({})", sizes.len())));
    }
    let family_vocab: Vec<Vec<String>> =
        (0..groups).map(|g| vocab(&mut rng, alphabet(g, groups), 40)).collect();
    let mut jsonl = String::new();
    for lang in registry.languages() {
        let group = families.get(&lang.name).copied().unwrap_or(sizes.len());
        let shared = &family_vocab[group];
        let own = vocab(&mut rng, alphabet(group, groups), 8);
        for feature in registry.feature_ids() {
            for _ in 0..per_cell {
                let mut lines = Vec::new();
                for _ in 0..4 {
                    let mut toks: Vec<&str> = (0..4).map(|_| shared[rng.random_range(0..shared.len())].as_str()).collect();
                    toks.push(own[rng.random_range(0..own.len())].as_str());
                    lines.push(toks.join(" "));
                }
                let rec = serde_json::json!({
                    "language": lang.name,
                    "feature": feature.to_string(),
                    "text": lines.join("\n"),
                });
                jsonl.push_str(&rec.to_string());
                jsonl.push('\n');
            }
        }
    }
    Ok(PlantedCorpus { jsonl, families })
}
