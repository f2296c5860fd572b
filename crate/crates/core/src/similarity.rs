//! Normalized cosine similarity, the pairwise matrix and centrality
//! statistics.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{EmbeddingVector, LanguageEmbedding};
use crate::error::{Error, Result};
use crate::taxonomy::{hex, LanguageRegistry, ResourceTier};

/// Tolerated floating-point overshoot outside `[0, 1]` before clamping.
const CLAMP_SLACK: f64 = 1e-12;

fn scaled_cosine(a: &EmbeddingVector, b: &EmbeddingVector, a_name: &str, b_name: &str) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let na = a.norm();
    if na == 0.0 {
        return Err(Error::ZeroVector(a_name.to_string()));
    }
    let nb = b.norm();
    if nb == 0.0 {
        return Err(Error::ZeroVector(b_name.to_string()));
    }
    let s = 0.5 + 0.5 * (a.dot(b) / (na * nb));
    if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&s) {
        return Err(Error::Invariant(format!("similarity {s} outside [0, 1]")));
    }
    Ok(s.clamp(0.0, 1.0))
}

/// `1/2 + 1/2 · cos(a, b)`, in `[0, 1]`.
pub fn normalized_cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    scaled_cosine(a, b, "left", "right")
}

/// Symmetric similarity matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    languages: Vec<String>,
    values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provider: Option<String>,
}

impl SimilarityMatrix {
    /// Checks shape, exact symmetry, range and a unit diagonal.
    pub fn new(languages: Vec<String>, values: Vec<Vec<f64>>, provider: Option<String>) -> Result<Self> {
        let n = languages.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedMatrix(format!("expected a {n}×{n} matrix")));
        }
        for i in 0..n {
            if languages[..i].contains(&languages[i]) {
                return Err(Error::MalformedMatrix(format!("duplicate language `{}`", languages[i])));
            }
            if values[i][i] != 1.0 {
                return Err(Error::MalformedMatrix(format!("diagonal of `{}` is not 1", languages[i])));
            }
            for j in 0..n {
                let v = values[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::MalformedMatrix(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if v != values[j][i] {
                    return Err(Error::MalformedMatrix(format!("entry ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(SimilarityMatrix { languages, values, provider })
    }

    /// Builds from the strict upper triangle (row-major), mirroring it.
    pub fn from_upper(languages: Vec<String>, upper: &[f64], provider: Option<String>) -> Result<Self> {
        let n = languages.len();
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::MalformedMatrix("wrong number of upper-triangle entries".into()));
        }
        let mut values = vec![vec![1.0; n]; n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked");
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Self::new(languages, values, provider)
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn provider(&self) -> Option<&str> {
        self.provider.as_deref()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, language: &str) -> Option<usize> {
        let t = language.trim();
        self.languages.iter().position(|l| l.eq_ignore_ascii_case(t))
    }

    pub fn require(&self, language: &str) -> Result<usize> {
        self.index_of(language).ok_or_else(|| Error::UnknownLanguage(language.to_string()))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.values[self.require(a)?][self.require(b)?])
    }

    /// Sub-matrix over `keep` (indices into this matrix, in the given order).
    pub fn select(&self, keep: &[usize]) -> SimilarityMatrix {
        SimilarityMatrix {
            languages: keep.iter().map(|&i| self.languages[i].clone()).collect(),
            values: keep.iter().map(|&i| keep.iter().map(|&j| self.values[i][j]).collect()).collect(),
            provider: self.provider.clone(),
        }
    }

    fn csv_body(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["language".to_string()];
        header.extend(self.languages.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (name, row) in self.languages.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// SHA-256 of the CSV body (no comment lines).
    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.csv_body().as_bytes()))
    }

    /// CSV with a header row and column of language names. Values keep full
    /// precision. Optional `# key: value` comment lines precede the table.
    pub fn to_csv(&self, manifest_digest: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(d) = manifest_digest {
            out.push_str(&format!("# manifest: {d}\n"));
        }
        if let Some(p) = &self.provider {
            out.push_str(&format!("# provider: {p}\n"));
        }
        out.push_str(&self.csv_body());
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut provider = None;
        let mut body = String::new();
        for line in text.lines() {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(p) = comment.trim().strip_prefix("provider:") {
                    provider = Some(p.trim().to_string());
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = r.headers().map_err(|e| Error::MalformedMatrix(e.to_string()))?.clone();
        let languages: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::MalformedMatrix(e.to_string()))?;
            if rec.get(0) != languages.get(i).map(String::as_str) {
                return Err(Error::MalformedMatrix(format!("row {} label does not match header", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::MalformedMatrix(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        Self::new(languages, values, provider)
    }
}

/// Pairwise normalized cosine over aggregate vectors, in input order.
/// Each pair is computed once and mirrored.
pub fn build_similarity_matrix(embeddings: &[LanguageEmbedding], provider: Option<String>) -> Result<SimilarityMatrix> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::DegenerateInput(n));
    }
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        let a = &embeddings[i];
        if a.aggregate.norm() == 0.0 {
            return Err(Error::ZeroVector(a.language.clone()));
        }
        for j in i + 1..n {
            let b = &embeddings[j];
            let s = scaled_cosine(&a.aggregate, &b.aggregate, &a.language, &b.language)?;
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    SimilarityMatrix::new(embeddings.iter().map(|e| e.language.clone()).collect(), values, provider)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageValue {
    pub language: String,
    pub value: f64,
}

/// Summary over a set of pairwise similarities (population σ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub members: Vec<String>,
    pub pairs: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceColumn {
    pub reference: String,
    /// Similarity of each programming language to the reference.
    pub values: Vec<LanguageValue>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityStats {
    /// Mean off-diagonal similarity, excluding the reference language.
    pub mean_similarity: Vec<LanguageValue>,
    pub centroid_language: String,
    pub reference: Option<ReferenceColumn>,
    pub overall: GroupSummary,
    /// Per resource tier, for tiers with at least two languages.
    pub tiers: Vec<(ResourceTier, GroupSummary)>,
}

impl SimilarityStats {
    pub fn mean_of(&self, language: &str) -> Option<f64> {
        self.mean_similarity.iter().find(|v| v.language == language).map(|v| v.value)
    }
}

/// Matrix indices of non-reference languages in registry order.
pub(crate) fn programming_indices(matrix: &SimilarityMatrix, registry: &LanguageRegistry) -> Result<Vec<usize>> {
    for l in matrix.languages() {
        if registry.get(l).is_none() {
            return Err(Error::UnknownLanguage(l.clone()));
        }
    }
    Ok(registry
        .languages()
        .iter()
        .filter(|l| !l.is_reference)
        .filter_map(|l| matrix.index_of(&l.name))
        .collect())
}

pub fn group_summary(matrix: &SimilarityMatrix, members: &[&str]) -> Result<Option<GroupSummary>> {
    let idx = members.iter().map(|m| matrix.require(m)).collect::<Result<Vec<_>>>()?;
    let mut vals = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            vals.push(matrix.value(i, j));
        }
    }
    if vals.is_empty() {
        return Ok(None);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Some(GroupSummary {
        members: idx.iter().map(|&i| matrix.languages()[i].clone()).collect(),
        pairs: vals.len(),
        mean,
        std_dev: var.sqrt(),
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }))
}

/// Column of similarities to the registry's reference language.
pub fn reference_column(matrix: &SimilarityMatrix, registry: &LanguageRegistry) -> Result<ReferenceColumn> {
    let reference = registry.reference().ok_or(Error::ReferenceLanguageMissing)?;
    let r = matrix.index_of(&reference.name).ok_or(Error::ReferenceLanguageMissing)?;
    let prog = programming_indices(matrix, registry)?;
    let values: Vec<LanguageValue> = prog
        .iter()
        .map(|&i| LanguageValue { language: matrix.languages()[i].clone(), value: matrix.value(i, r) })
        .collect();
    let mean = if values.is_empty() { 0.0 } else { values.iter().map(|v| v.value).sum::<f64>() / values.len() as f64 };
    Ok(ReferenceColumn { reference: matrix.languages()[r].clone(), values, mean })
}

pub fn similarity_stats(matrix: &SimilarityMatrix, registry: &LanguageRegistry) -> Result<SimilarityStats> {
    let prog = programming_indices(matrix, registry)?;
    if prog.len() < 2 {
        return Err(Error::DegenerateInput(prog.len()));
    }
    let mean_similarity: Vec<LanguageValue> = prog
        .iter()
        .map(|&i| {
            let sum: f64 = prog.iter().filter(|&&j| j != i).map(|&j| matrix.value(i, j)).sum();
            LanguageValue { language: matrix.languages()[i].clone(), value: sum / (prog.len() - 1) as f64 }
        })
        .collect();
    // First maximum in registry order wins ties.
    let centroid = mean_similarity
        .iter()
        .fold(None::<&LanguageValue>, |best, v| match best {
            Some(b) if b.value >= v.value => Some(b),
            _ => Some(v),
        })
        .expect("at least two languages");
    let reference = match reference_column(matrix, registry) {
        Ok(col) => Some(col),
        Err(Error::ReferenceLanguageMissing) => None,
        Err(e) => return Err(e),
    };
    let names: Vec<&str> = prog.iter().map(|&i| matrix.languages()[i].as_str()).collect();
    let overall = group_summary(matrix, &names)?.expect("at least one pair");
    let mut tiers = Vec::new();
    for tier in [ResourceTier::High, ResourceTier::Low] {
        let members: Vec<&str> = names
            .iter()
            .copied()
            .filter(|n| registry.get(n).is_some_and(|l| l.resource_tier == tier))
            .collect();
        if let Some(s) = group_summary(matrix, &members)? {
            tiers.push((tier, s));
        }
    }
    Ok(SimilarityStats {
        centroid_language: centroid.language.clone(),
        mean_similarity,
        reference,
        overall,
        tiers,
    })
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<&'a str>,
    #[serde(flatten)]
    matrix: &'a SimilarityMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<&'a SimilarityStats>,
}

/// JSON export with an optional stats block.
pub fn matrix_json(matrix: &SimilarityMatrix, stats: Option<&SimilarityStats>, manifest_digest: Option<&str>) -> String {
    serde_json::to_string_pretty(&MatrixJson { manifest: manifest_digest, matrix, stats }).expect("matrix serializes")
}
