//! Transfer-source recommendation, curriculum ordering and pivot ranking
//! over a similarity matrix.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{similarity_stats, LanguageValue, SimilarityMatrix};
use crate::taxonomy::{LanguageRegistry, ResourceTier};

/// Sort key placing registry languages first, in registry order.
fn registry_rank(registry: &LanguageRegistry, name: &str, fallback: usize) -> (usize, usize) {
    registry.position(name).map_or((1, fallback), |p| (0, p))
}

/// Stable descending sort of already registry-ordered values.
fn sort_desc(values: &mut [LanguageValue]) {
    values.sort_by(|a, b| b.value.total_cmp(&a.value));
}

fn table(title: &str, header: (&str, &str), rows: impl IntoIterator<Item = (String, f64)>) -> String {
    let rows: Vec<(String, f64)> = rows.into_iter().collect();
    let w = rows.iter().map(|(l, _)| l.chars().count()).chain([header.0.len()]).max().unwrap_or(0);
    let mut out = format!("{title}\n");
    let _ = writeln!(out, "  #  {:<w$}  {}", header.0, header.1);
    for (i, (l, v)) in rows.iter().enumerate() {
        let _ = writeln!(out, "{:>3}  {l:<w$}  {v:.4}", i + 1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecommendation {
    pub target: String,
    /// High-tier languages by similarity to the target, descending.
    pub ranked_sources: Vec<LanguageValue>,
    pub chosen: String,
}

impl TransferRecommendation {
    pub fn to_table(&self) -> String {
        table(
            &format!("transfer sources for {} (chosen: {})", self.target, self.chosen),
            ("source", "similarity"),
            self.ranked_sources.iter().map(|v| (v.language.clone(), v.value)),
        )
    }
}

/// Ranks the high-tier languages by similarity to `target`.
pub fn recommend_transfer_source(
    target: &str,
    matrix: &SimilarityMatrix,
    registry: &LanguageRegistry,
) -> Result<TransferRecommendation> {
    let t = matrix.require(target)?;
    let mut ranked: Vec<LanguageValue> = registry
        .languages()
        .iter()
        .filter(|l| l.resource_tier == ResourceTier::High)
        .filter_map(|l| matrix.index_of(&l.name))
        .filter(|&i| i != t)
        .map(|i| LanguageValue { language: matrix.languages()[i].clone(), value: matrix.value(t, i) })
        .collect();
    if ranked.is_empty() {
        return Err(Error::NoHighResourceLanguages);
    }
    sort_desc(&mut ranked);
    Ok(TransferRecommendation {
        target: matrix.languages()[t].clone(),
        chosen: ranked[0].language.clone(),
        ranked_sources: ranked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumPolicy {
    NearToFar,
    FarToNear,
    Random,
}

impl std::str::FromStr for CurriculumPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "near-to-far" => Ok(CurriculumPolicy::NearToFar),
            "far-to-near" => Ok(CurriculumPolicy::FarToNear),
            "random" => Ok(CurriculumPolicy::Random),
            other => Err(Error::InvalidArgument(format!("unknown curriculum policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub language: String,
    pub similarity_to_base: f64,
    /// Free-form instructions for a training harness, e.g. optimizer resets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub base: String,
    pub policy: CurriculumPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub order: Vec<CurriculumStage>,
}

impl CurriculumPlan {
    pub fn languages(&self) -> Vec<&str> {
        self.order.iter().map(|s| s.language.as_str()).collect()
    }

    pub fn to_table(&self) -> String {
        let policy = match (self.policy, self.seed) {
            (CurriculumPolicy::NearToFar, _) => "near-to-far".to_string(),
            (CurriculumPolicy::FarToNear, _) => "far-to-near".to_string(),
            (CurriculumPolicy::Random, Some(s)) => format!("random, seed {s}"),
            (CurriculumPolicy::Random, None) => "random".to_string(),
        };
        table(
            &format!("curriculum from {} ({policy})", self.base),
            ("language", "similarity"),
            self.order.iter().map(|s| (s.language.clone(), s.similarity_to_base)),
        )
    }
}

/// Orders `languages` by similarity to `base`. Ties keep registry order;
/// `Random` shuffles the registry-ordered set with a ChaCha8 stream seeded
/// from `seed`.
pub fn curriculum_order(
    base: &str,
    languages: &[String],
    matrix: &SimilarityMatrix,
    registry: &LanguageRegistry,
    policy: CurriculumPolicy,
    seed: Option<u64>,
) -> Result<CurriculumPlan> {
    let b = matrix.require(base)?;
    let mut idx = Vec::with_capacity(languages.len());
    for l in languages {
        let i = matrix.require(l)?;
        if idx.contains(&i) {
            return Err(Error::InvalidArgument(format!("language `{l}` listed twice")));
        }
        idx.push(i);
    }
    let mut order: Vec<(usize, usize)> = idx.into_iter().enumerate().map(|(k, i)| (i, k)).collect();
    order.sort_by_key(|&(i, k)| registry_rank(registry, &matrix.languages()[i], k));
    let sim = |i: usize| matrix.value(b, i);
    match policy {
        CurriculumPolicy::NearToFar => order.sort_by(|x, y| sim(y.0).total_cmp(&sim(x.0))),
        CurriculumPolicy::FarToNear => order.sort_by(|x, y| sim(x.0).total_cmp(&sim(y.0))),
        CurriculumPolicy::Random => {
            let seed = seed.ok_or(Error::MissingSeed)?;
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
    }
    Ok(CurriculumPlan {
        base: matrix.languages()[b].clone(),
        policy,
        seed: if policy == CurriculumPolicy::Random { seed } else { None },
        order: order
            .into_iter()
            .map(|(i, _)| CurriculumStage { language: matrix.languages()[i].clone(), similarity_to_base: sim(i), notes: None })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotScoring {
    /// Mean similarity to every non-reference language.
    #[default]
    Centrality,
    /// Mean similarity to the targets.
    TargetMean,
    /// `min(sim(pivot, source), mean sim(pivot, targets))`.
    Betweenness,
}

impl std::str::FromStr for PivotScoring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "centrality" => Ok(PivotScoring::Centrality),
            "target-mean" => Ok(PivotScoring::TargetMean),
            "betweenness" => Ok(PivotScoring::Betweenness),
            other => Err(Error::InvalidArgument(format!("unknown pivot scoring `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotOptions {
    pub exclude_source: bool,
    pub exclude_targets: bool,
    /// Restricts candidates; defaults to every non-reference language.
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
}

impl Default for PivotOptions {
    fn default() -> Self {
        PivotOptions { exclude_source: true, exclude_targets: false, candidates: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRanking {
    pub source: String,
    pub targets: Vec<String>,
    pub scoring: PivotScoring,
    pub ranked_pivots: Vec<LanguageValue>,
}

impl PivotRanking {
    pub fn to_table(&self) -> String {
        table(
            &format!("pivots for {} → {}", self.source, self.targets.join(", ")),
            ("pivot", "score"),
            self.ranked_pivots.iter().map(|v| (v.language.clone(), v.value)),
        )
    }
}

/// Scores candidate pivots and sorts them descending, ties in registry order.
/// Under `TargetMean` and `Betweenness` a pivot is never scored against
/// itself; a candidate that is the only target is dropped.
pub fn rank_pivots(
    source: &str,
    targets: &[String],
    matrix: &SimilarityMatrix,
    registry: &LanguageRegistry,
    scoring: PivotScoring,
    options: &PivotOptions,
) -> Result<PivotRanking> {
    let s = matrix.require(source)?;
    let t_idx = targets.iter().map(|t| matrix.require(t)).collect::<Result<Vec<_>>>()?;
    if t_idx.is_empty() && scoring != PivotScoring::Centrality {
        return Err(Error::InvalidArgument("pivot scoring needs at least one target".into()));
    }
    let prog = crate::similarity::programming_indices(matrix, registry)?;
    let pool: Vec<usize> = match &options.candidates {
        None => prog.clone(),
        Some(names) => {
            let mut v = names.iter().map(|c| matrix.require(c)).collect::<Result<Vec<_>>>()?;
            v.sort_by_key(|&i| registry_rank(registry, &matrix.languages()[i], i));
            v.dedup();
            v
        }
    };
    let centrality = if scoring == PivotScoring::Centrality { Some(similarity_stats(matrix, registry)?) } else { None };
    let target_mean = |p: usize| -> Option<f64> {
        let others: Vec<usize> = t_idx.iter().copied().filter(|&t| t != p).collect();
        (!others.is_empty()).then(|| others.iter().map(|&t| matrix.value(p, t)).sum::<f64>() / others.len() as f64)
    };
    let mut ranked = Vec::new();
    for p in pool {
        if (options.exclude_source && p == s) || (options.exclude_targets && t_idx.contains(&p)) {
            continue;
        }
        let name = &matrix.languages()[p];
        let value = match scoring {
            PivotScoring::Centrality => match centrality.as_ref().and_then(|c| c.mean_of(name)) {
                Some(v) => v,
                None => continue,
            },
            PivotScoring::TargetMean => match target_mean(p) {
                Some(v) => v,
                None => continue,
            },
            PivotScoring::Betweenness => match target_mean(p) {
                Some(v) => v.min(matrix.value(p, s)),
                None => continue,
            },
        };
        ranked.push(LanguageValue { language: name.clone(), value });
    }
    if ranked.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    sort_desc(&mut ranked);
    Ok(PivotRanking {
        source: matrix.languages()[s].clone(),
        targets: t_idx.iter().map(|&i| matrix.languages()[i].clone()).collect(),
        scoring,
        ranked_pivots: ranked,
    })
}
