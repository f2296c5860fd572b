//! Discover programming-language families from feature-aligned code corpora
//! and turn the resulting similarity geometry into training plans.
//!
//! Pipeline: [`corpus`] → [`embedding`] → [`similarity`] → [`clustering`],
//! with [`planner`] consuming the similarity matrix and [`report`] /
//! [`pipeline`] producing on-disk artifacts.

#![allow(clippy::needless_range_loop)]

pub mod clustering;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod pipeline;
pub mod planner;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod taxonomy;

pub use clustering::{
    adjusted_rand_index, cluster_languages, cut_dendrogram, elbow_k, silhouette_score, to_dissimilarity,
    ward_linkage, ClusterOptions, ClusteringResult, Dendrogram, DissimilarityMatrix, DissimilarityMode, KSelection,
    Merge, Partition,
};
pub use corpus::{
    corpus_stats, ingest_corpus, render_generation_prompt, validate_corpus, CodeSample, ContentHash, Corpus,
    CorpusManifest,
};
pub use embedding::{
    aggregate_language_embedding, build_language_embeddings, embed_samples, feature_centroid, Aggregation,
    EmbeddingCache, EmbeddingProvider, EmbeddingVector, LanguageEmbedding, LanguageEmbeddings, LocalEmbedder,
    ProviderIdentity,
};
pub use error::{Error, Result};
pub use planner::{curriculum_order, rank_pivots, recommend_transfer_source, CurriculumPlan, PivotRanking, TransferRecommendation};
pub use similarity::{build_similarity_matrix, normalized_cosine, similarity_stats, SimilarityMatrix, SimilarityStats};
pub use taxonomy::{default_registry, load_registry, FeatureId, Language, LanguageRegistry, LinguisticFeature, ResourceTier};
