//! Feature-aligned corpus: prompt rendering, JSONL ingestion, validation
//! and statistics.
//!
//! Record format, one JSON object per line:
//!
//! ```text
//! {"language": "Go", "feature": "F1", "text": "var x int = 1", "meta": {...}}
//! ```
//!
//! `meta` is optional and carried through untouched.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, RecordError, Result};
use crate::taxonomy::{hex, FeatureId, Language, LanguageRegistry, LinguisticFeature};

/// Cell-level duplicate rate above which a cell is flagged.
pub const DEFAULT_DUPLICATE_THRESHOLD: f64 = 0.05;

/// SHA-256 of normalized snippet text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of(normalized: &str) -> Self {
        ContentHash(Sha256::digest(normalized.as_bytes()).into())
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex(&self.0))
    }
}

/// NFC, line endings folded to `\n`, trailing whitespace stripped from every
/// line and from the end of the text.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let unified = nfc.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(unified.len());
    for (i, line) in unified.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(line.trim_end());
    }
    let trimmed = out.trim_end_matches('\n').len();
    out.truncate(trimmed);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeSample {
    pub language: String,
    pub feature: FeatureId,
    /// Normalized snippet body.
    pub text: String,
    pub sample_index: usize,
    #[serde(serialize_with = "ser_hash")]
    pub content_hash: ContentHash,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

fn ser_hash<S: serde::Serializer>(h: &ContentHash, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(h)
}

impl CodeSample {
    /// Stable identifier `language/feature/index`.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.language, self.feature, self.sample_index)
    }
}

/// A record that parsed cleanly but has not yet been assigned an index.
#[derive(Debug, Clone)]
struct PendingSample {
    language: String,
    feature: FeatureId,
    text: String,
    content_hash: ContentHash,
    meta: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawRecord {
    language: Option<String>,
    feature: Option<serde_json::Value>,
    text: Option<String>,
    #[serde(default)]
    meta: Option<serde_json::Value>,
}

/// Immutable, indexed collection of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    samples: Vec<CodeSample>,
}

impl Corpus {
    pub fn samples(&self) -> &[CodeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples of one cell in index order.
    pub fn cell(&self, language: &str, feature: FeatureId) -> impl Iterator<Item = &CodeSample> {
        let language = language.to_string();
        self.samples
            .iter()
            .filter(move |s| s.feature == feature && s.language == language)
    }

    /// Order-insensitive digest over `(language, feature, content_hash)`.
    pub fn digest(&self) -> String {
        let mut rows: Vec<String> = self
            .samples
            .iter()
            .map(|s| format!("{}\t{}\t{}\n", s.language, s.feature, s.content_hash))
            .collect();
        rows.sort();
        let mut h = Sha256::new();
        for r in rows {
            h.update(r.as_bytes());
        }
        hex(&h.finalize())
    }

    fn from_pending(pending: impl IntoIterator<Item = PendingSample>) -> Self {
        let mut next: HashMap<(String, FeatureId), usize> = HashMap::new();
        let samples = pending
            .into_iter()
            .map(|p| {
                let slot = next.entry((p.language.clone(), p.feature)).or_insert(0);
                let sample_index = *slot;
                *slot += 1;
                CodeSample {
                    language: p.language,
                    feature: p.feature,
                    text: p.text,
                    sample_index,
                    content_hash: p.content_hash,
                    meta: p.meta,
                }
            })
            .collect();
        Corpus { samples }
    }

    /// Builds a corpus directly from `(language, feature, text)` triples.
    pub fn from_texts<'a>(
        registry: &LanguageRegistry,
        items: impl IntoIterator<Item = (&'a str, FeatureId, &'a str)>,
    ) -> Result<Self> {
        let mut pending = Vec::new();
        let mut errors = Vec::new();
        for (i, (lang, feat, text)) in items.into_iter().enumerate() {
            match check_record(registry, i + 1, lang, &feat.to_string(), text, None) {
                Ok(p) => pending.push(p),
                Err(e) => errors.push(e),
            }
        }
        if errors.is_empty() {
            Ok(Corpus::from_pending(pending))
        } else {
            Err(Error::Ingest(errors))
        }
    }
}

fn check_record(
    registry: &LanguageRegistry,
    line: usize,
    language: &str,
    feature: &str,
    text: &str,
    meta: Option<serde_json::Value>,
) -> std::result::Result<PendingSample, RecordError> {
    let lang: &Language = registry
        .get(language)
        .ok_or_else(|| RecordError::UnknownLanguage {
            line,
            language: language.to_string(),
        })?;
    let feature_id = feature
        .parse::<FeatureId>()
        .ok()
        .filter(|id| registry.has_feature(*id))
        .ok_or_else(|| RecordError::UnknownFeature {
            line,
            feature: feature.to_string(),
        })?;
    let normalized = normalize_text(text);
    if normalized.trim().is_empty() {
        return Err(RecordError::MalformedRecord {
            line,
            reason: "empty text".into(),
        });
    }
    Ok(PendingSample {
        language: lang.name.clone(),
        feature: feature_id,
        content_hash: ContentHash::of(&normalized),
        text: normalized,
        meta,
    })
}

fn parse_line(registry: &LanguageRegistry, line_no: usize, line: &str) -> std::result::Result<PendingSample, RecordError> {
    let malformed = |reason: String| RecordError::MalformedRecord {
        line: line_no,
        reason,
    };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let language = raw.language.ok_or_else(|| malformed("missing `language`".into()))?;
    let feature = match raw.feature {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(other) => return Err(malformed(format!("`feature` must be a string, got {other}"))),
        None => return Err(malformed("missing `feature`".into())),
    };
    let text = raw.text.ok_or_else(|| malformed("missing `text`".into()))?;
    check_record(registry, line_no, &language, &feature, &text, raw.meta)
}

fn parse_stream(
    registry: &LanguageRegistry,
    source: impl BufRead,
) -> std::result::Result<Vec<PendingSample>, Vec<RecordError>> {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errors.push(RecordError::MalformedRecord {
                    line: line_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(registry, line_no, &line) {
            Ok(p) => ok.push(p),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(ok)
    } else {
        Err(errors)
    }
}

/// Parses newline-delimited records. Every rejected line is reported.
pub fn ingest_corpus(source: impl BufRead, registry: &LanguageRegistry) -> Result<Corpus> {
    parse_stream(registry, source)
        .map(Corpus::from_pending)
        .map_err(Error::Ingest)
}

/// Ingests several shard files concurrently and merges them in the order
/// given. Line numbers in errors are relative to their shard.
pub fn ingest_shards<P: AsRef<Path> + Sync>(paths: &[P], registry: &LanguageRegistry) -> Result<Corpus> {
    let results: Vec<Result<std::result::Result<Vec<PendingSample>, Vec<RecordError>>>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = paths
                .iter()
                .map(|p| {
                    scope.spawn(move || {
                        let p = p.as_ref();
                        let file = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
                        Ok(parse_stream(registry, std::io::BufReader::new(file)))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("ingest worker panicked"))
                .collect()
        });
    let mut pending = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r? {
            Ok(p) => pending.extend(p),
            Err(e) => errors.extend(e),
        }
    }
    if errors.is_empty() {
        Ok(Corpus::from_pending(pending))
    } else {
        Err(Error::Ingest(errors))
    }
}

fn list_languages(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [one] => (*one).to_string(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

fn snippet_noun(n: usize) -> &'static str {
    if n == 1 {
        "code snippet"
    } else {
        "code snippets"
    }
}

/// Renders the generation prompt for one feature.
pub fn render_generation_prompt(
    feature: &LinguisticFeature,
    languages: &[&Language],
    samples_per_language: usize,
) -> Result<String> {
    if languages.is_empty() {
        return Err(Error::InvalidArgument("no languages to render".into()));
    }
    if samples_per_language == 0 {
        return Err(Error::InvalidArgument("samples_per_language must be at least 1".into()));
    }
    let names: Vec<&str> = languages.iter().map(|l| l.name.as_str()).collect();
    let n = samples_per_language;
    let noun = snippet_noun(n);
    Ok(format!(
        "Produce code exemplars for {name} in {langs}.\n\
         # {name}: {desc}\n\
         # You must strictly adhere to the following rules:\n\
         1) Generate {n} {noun} for each language;\n\
         2) These {n} {noun} must not only conform to the feature specification but should also be maximally diversified;\n\
         3) Ensure semantic consistency across code snippets in different languages, meaning they should implement the same functionality.\n",
        name = feature.name,
        desc = feature.description,
        langs = list_languages(&names),
    ))
}

/// Prompt variant for the natural-language reference cells.
pub fn render_reference_prompt(
    feature: &LinguisticFeature,
    reference: &Language,
    samples: usize,
) -> Result<String> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let noun = if samples == 1 { "description" } else { "descriptions" };
    Ok(format!(
        "Produce plain {lang} task descriptions for {name}.\n\
         # {name}: {desc}\n\
         # You must strictly adhere to the following rules:\n\
         1) Write {samples} {noun} in {lang}, without any code;\n\
         2) These {samples} {noun} must each describe a program exercising the feature and should be maximally diversified;\n\
         3) Each description must state the same functionality that the code snippets for this feature implement.\n",
        lang = reference.name,
        name = feature.name,
        desc = feature.description,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub language: String,
    pub feature: FeatureId,
    pub count: usize,
    pub duplicate_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusManifest {
    pub cells: Vec<CellSummary>,
    pub total: usize,
    /// Samples of non-reference languages only.
    pub programming_total: usize,
    /// Fraction of samples sharing a content hash with another sample of
    /// the same cell.
    pub duplicate_rate: f64,
    pub duplicate_threshold: f64,
    /// Cells whose duplicate rate exceeds the threshold.
    pub flagged_cells: Vec<(String, FeatureId)>,
}

impl CorpusManifest {
    pub fn count(&self, language: &str, feature: FeatureId) -> usize {
        self.cells
            .iter()
            .find(|c| c.language == language && c.feature == feature)
            .map_or(0, |c| c.count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Missing { language: String, feature: FeatureId, expected: usize },
    Underfull { language: String, feature: FeatureId, found: usize, expected: usize },
    Overfull { language: String, feature: FeatureId, found: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { language, feature, expected } => {
                write!(f, "{language}/{feature}: missing (expected {expected})")
            }
            Violation::Underfull { language, feature, found, expected } => {
                write!(f, "{language}/{feature}: {found} samples, expected {expected}")
            }
            Violation::Overfull { language, feature, found, expected } => {
                write!(f, "{language}/{feature}: {found} samples, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub manifest: CorpusManifest,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> std::result::Result<CorpusManifest, Vec<Violation>> {
        if self.violations.is_empty() {
            Ok(self.manifest)
        } else {
            Err(self.violations)
        }
    }
}

/// Sample count and per-hash counts of one cell.
type CellTally = (usize, HashMap<ContentHash, usize>);

/// Per-cell counts and duplicate counts.
fn tally(corpus: &Corpus) -> HashMap<(&str, FeatureId), CellTally> {
    let mut cells: HashMap<(&str, FeatureId), CellTally> = HashMap::new();
    for s in corpus.samples() {
        let entry = cells.entry((s.language.as_str(), s.feature)).or_default();
        entry.0 += 1;
        *entry.1.entry(s.content_hash).or_insert(0) += 1;
    }
    cells
}

fn duplicated(hashes: &HashMap<ContentHash, usize>) -> usize {
    hashes.values().filter(|&&c| c > 1).sum()
}

/// Checks that every `(language, feature)` cell of the registry holds
/// exactly `expected_per_cell` samples.
pub fn validate_corpus(
    corpus: &Corpus,
    registry: &LanguageRegistry,
    expected_per_cell: usize,
) -> ValidationReport {
    validate_corpus_with_threshold(corpus, registry, expected_per_cell, DEFAULT_DUPLICATE_THRESHOLD)
}

pub fn validate_corpus_with_threshold(
    corpus: &Corpus,
    registry: &LanguageRegistry,
    expected_per_cell: usize,
    duplicate_threshold: f64,
) -> ValidationReport {
    let tallies = tally(corpus);
    let mut cells = Vec::new();
    let mut violations = Vec::new();
    let mut flagged_cells = Vec::new();
    let mut total = 0;
    let mut programming_total = 0;
    let mut dup_total = 0;
    for lang in registry.languages() {
        for feature in registry.feature_ids() {
            let (count, dups) = tallies
                .get(&(lang.name.as_str(), feature))
                .map_or((0, 0), |(c, h)| (*c, duplicated(h)));
            total += count;
            if !lang.is_reference {
                programming_total += count;
            }
            dup_total += dups;
            let duplicate_rate = if count == 0 { 0.0 } else { dups as f64 / count as f64 };
            if duplicate_rate > duplicate_threshold {
                flagged_cells.push((lang.name.clone(), feature));
            }
            let language = lang.name.clone();
            if count == 0 && expected_per_cell > 0 {
                violations.push(Violation::Missing { language: language.clone(), feature, expected: expected_per_cell });
            } else if count < expected_per_cell {
                violations.push(Violation::Underfull { language: language.clone(), feature, found: count, expected: expected_per_cell });
            } else if count > expected_per_cell {
                violations.push(Violation::Overfull { language: language.clone(), feature, found: count, expected: expected_per_cell });
            }
            cells.push(CellSummary { language, feature, count, duplicate_rate });
        }
    }
    ValidationReport {
        manifest: CorpusManifest {
            cells,
            total,
            programming_total,
            duplicate_rate: if total == 0 { 0.0 } else { dup_total as f64 / total as f64 },
            duplicate_threshold,
            flagged_cells,
        },
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthDistribution {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_language: BTreeMap<String, usize>,
    pub per_feature: BTreeMap<FeatureId, usize>,
    /// Character lengths of normalized text; `None` for an empty corpus.
    pub length: Option<LengthDistribution>,
    pub duplicate_rate: f64,
    pub per_language_duplicate_rate: BTreeMap<String, f64>,
}

impl CorpusStats {
    pub fn language_count(&self, language: &str) -> usize {
        self.per_language.get(language).copied().unwrap_or(0)
    }

    pub fn feature_count(&self, feature: FeatureId) -> usize {
        self.per_feature.get(&feature).copied().unwrap_or(0)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_language: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_feature: BTreeMap<FeatureId, usize> = BTreeMap::new();
    let mut lengths: Vec<usize> = Vec::with_capacity(corpus.len());
    for s in corpus.samples() {
        *per_language.entry(s.language.clone()).or_insert(0) += 1;
        *per_feature.entry(s.feature).or_insert(0) += 1;
        lengths.push(s.text.chars().count());
    }
    let mut lang_dups: BTreeMap<String, usize> = BTreeMap::new();
    let mut dup_total = 0;
    for ((lang, _), (_, hashes)) in tally(corpus) {
        let d = duplicated(&hashes);
        dup_total += d;
        *lang_dups.entry(lang.to_string()).or_insert(0) += d;
    }
    let per_language_duplicate_rate = per_language
        .iter()
        .map(|(l, &n)| (l.clone(), lang_dups.get(l).copied().unwrap_or(0) as f64 / n as f64))
        .collect();
    lengths.sort_unstable();
    let length = (!lengths.is_empty()).then(|| {
        let n = lengths.len();
        let median = if n % 2 == 1 {
            lengths[n / 2] as f64
        } else {
            (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
        };
        LengthDistribution {
            min: lengths[0],
            max: lengths[n - 1],
            mean: lengths.iter().sum::<usize>() as f64 / n as f64,
            median,
        }
    });
    CorpusStats {
        total: corpus.len(),
        per_language,
        per_feature,
        length,
        duplicate_rate: if corpus.is_empty() { 0.0 } else { dup_total as f64 / corpus.len() as f64 },
        per_language_duplicate_rate,
    }
}
