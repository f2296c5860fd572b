use std::fmt;
use std::path::PathBuf;

use crate::taxonomy::FeatureId;

pub type Result<T> = std::result::Result<T, Error>;

/// A single rejected line from corpus ingestion. Lines are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordError {
    MalformedRecord { line: usize, reason: String },
    UnknownLanguage { line: usize, language: String },
    UnknownFeature { line: usize, feature: String },
}

impl RecordError {
    pub fn line(&self) -> usize {
        match self {
            RecordError::MalformedRecord { line, .. }
            | RecordError::UnknownLanguage { line, .. }
            | RecordError::UnknownFeature { line, .. } => *line,
        }
    }
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordError::MalformedRecord { line, reason } => {
                write!(f, "line {line}: malformed record: {reason}")
            }
            RecordError::UnknownLanguage { line, language } => {
                write!(f, "line {line}: unknown language `{language}`")
            }
            RecordError::UnknownFeature { line, feature } => {
                write!(f, "line {line}: unknown feature `{feature}`")
            }
        }
    }
}

/// Broad classes used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Provider,
    Invariant,
    Other,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate language `{0}` in registry")]
    DuplicateLanguage(String),
    #[error("registry declares more than one reference language: {0:?}")]
    MultipleReferenceLanguages(Vec<String>),
    #[error("unknown feature id `{0}`")]
    UnknownFeatureId(String),
    #[error("invalid registry config: {0}")]
    InvalidConfig(String),

    #[error("unknown feature {0}")]
    UnknownFeature(FeatureId),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corpus ingestion rejected {} record(s); first: {}", .0.len(), .0[0])]
    Ingest(Vec<RecordError>),
    #[error("corpus failed validation: {}", .0.join("; "))]
    CorpusInvalid(Vec<String>),

    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding failed for {} sample(s)", .failed.len())]
    PartialFailure { failed: Vec<String> },
    #[error("embedding cache belongs to provider `{found}`, expected `{expected}`")]
    ProviderMismatch { expected: String, found: String },
    #[error("corrupt embedding cache: {0}")]
    CorruptCache(String),
    #[error("non-finite embedding component")]
    NonFinite,
    #[error("empty input")]
    EmptyInput,

    #[error("zero-norm vector for `{0}`")]
    ZeroVector(String),
    #[error("registry has no reference language")]
    ReferenceLanguageMissing,
    #[error("malformed similarity matrix: {0}")]
    MalformedMatrix(String),

    #[error("clustering needs at least two leaves, got {0}")]
    DegenerateInput(usize),
    #[error("invalid cluster count {k} for {leaves} leaves")]
    InvalidK { k: usize, leaves: usize },
    #[error("elbow range [{k_min}, {k_max}] is too narrow for {leaves} leaves")]
    RangeTooNarrow { k_min: usize, k_max: usize, leaves: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,

    #[error("no high-resource languages available")]
    NoHighResourceLanguages,
    #[error("random curriculum requires a seed")]
    MissingSeed,
    #[error("no pivot candidates remain")]
    EmptyCandidates,

    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O failure on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::DuplicateLanguage(_)
            | Error::MultipleReferenceLanguages(_)
            | Error::UnknownFeatureId(_)
            | Error::InvalidConfig(_)
            | Error::Ingest(_)
            | Error::CorpusInvalid(_) => ErrorClass::Validation,
            Error::ProviderUnavailable(_)
            | Error::DimensionMismatch { .. }
            | Error::PartialFailure { .. }
            | Error::ProviderMismatch { .. } => ErrorClass::Provider,
            Error::Invariant(_) => ErrorClass::Invariant,
            _ => ErrorClass::Other,
        }
    }
}
