//! Ward hierarchical clustering over language dissimilarities, elbow-based
//! cluster-count selection and silhouette validation.

mod dendrogram;
mod validation;
mod ward;

use serde::{Deserialize, Serialize};

pub use dendrogram::{cut_dendrogram, Dendrogram, Merge, Partition};
pub use validation::{
    adjusted_rand_index, elbow_curve, elbow_k, silhouette_score, within_cluster_dispersion, ElbowCurve, Silhouette,
};
pub use ward::{ward_linkage, TIE_EPS};

use crate::embedding::LanguageEmbeddings;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;
use crate::taxonomy::LanguageRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissimilaritySource {
    #[default]
    OneMinusSimilarity,
    EuclideanOnEmbeddings,
}

/// Alias used in options and on the command line.
pub type DissimilarityMode = DissimilaritySource;

impl std::str::FromStr for DissimilaritySource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-minus-sim" | "one_minus_similarity" => Ok(DissimilaritySource::OneMinusSimilarity),
            "euclidean" | "euclidean_on_embeddings" => Ok(DissimilaritySource::EuclideanOnEmbeddings),
            other => Err(Error::InvalidArgument(format!("unknown dissimilarity mode `{other}`"))),
        }
    }
}

/// Linkage criteria. Only Ward is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityMatrix {
    languages: Vec<String>,
    values: Vec<Vec<f64>>,
    source: DissimilaritySource,
}

impl DissimilarityMatrix {
    /// Requires a square, symmetric, non-negative matrix with zero diagonal.
    pub fn new(languages: Vec<String>, values: Vec<Vec<f64>>, source: DissimilaritySource) -> Result<Self> {
        let n = languages.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedMatrix(format!("expected a {n}×{n} dissimilarity matrix")));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::MalformedMatrix(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i][j];
                if !v.is_finite() || v < 0.0 || v != values[j][i] {
                    return Err(Error::MalformedMatrix(format!("entry ({i}, {j}) = {v} invalid")));
                }
            }
        }
        Ok(DissimilarityMatrix { languages, values, source })
    }

    /// Pairwise Euclidean distances between points.
    pub fn euclidean_points(languages: Vec<String>, points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if points[i].len() != points[j].len() {
                    return Err(Error::DimensionMismatch { expected: points[i].len(), found: points[j].len() });
                }
                let d = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                values[i][j] = d;
                values[j][i] = d;
            }
        }
        Self::new(languages, values, DissimilaritySource::EuclideanOnEmbeddings)
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

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn source(&self) -> DissimilaritySource {
        self.source
    }
}

/// `d = 1 - s`, or Euclidean distance between aggregate vectors (which then
/// must be supplied).
pub fn to_dissimilarity(
    matrix: &SimilarityMatrix,
    mode: DissimilarityMode,
    embeddings: Option<&LanguageEmbeddings>,
) -> Result<DissimilarityMatrix> {
    let n = matrix.len();
    match mode {
        DissimilaritySource::OneMinusSimilarity => {
            let mut values = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = (1.0 - matrix.value(i, j)).max(0.0);
                    values[i][j] = d;
                    values[j][i] = d;
                }
            }
            DissimilarityMatrix::new(matrix.languages().to_vec(), values, mode)
        }
        DissimilaritySource::EuclideanOnEmbeddings => {
            let embeddings = embeddings.ok_or_else(|| {
                Error::InvalidArgument("euclidean dissimilarity needs language embeddings".into())
            })?;
            let points = matrix
                .languages()
                .iter()
                .map(|l| {
                    embeddings
                        .get(l)
                        .map(|e| e.aggregate.values().to_vec())
                        .ok_or_else(|| Error::UnknownLanguage(l.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            DissimilarityMatrix::euclidean_points(matrix.languages().to_vec(), &points)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSelection {
    Fixed(usize),
    Elbow { k_min: usize, k_max: usize },
    /// Elbow over `[1, min(10, n - 1)]`.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub mode: DissimilarityMode,
    pub k: KSelection,
    pub linkage: Linkage,
    /// Keep the reference language as a leaf.
    pub include_reference: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            mode: DissimilarityMode::OneMinusSimilarity,
            k: KSelection::Auto,
            linkage: Linkage::Ward,
            include_reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub partition: Partition,
    /// `None` when a single cluster was requested.
    pub silhouette: Option<Silhouette>,
    pub per_cluster: Vec<Vec<String>>,
    pub elbow: Option<ElbowCurve>,
    pub mode: DissimilarityMode,
}

/// dissimilarity → Ward → elbow (unless `k` is fixed) → cut → silhouette.
pub fn cluster_languages(
    matrix: &SimilarityMatrix,
    registry: &LanguageRegistry,
    options: &ClusterOptions,
    embeddings: Option<&LanguageEmbeddings>,
) -> Result<(ClusteringResult, Dendrogram)> {
    let keep: Vec<usize> = if options.include_reference {
        (0..matrix.len()).collect()
    } else {
        let mut v = crate::similarity::programming_indices(matrix, registry)?;
        v.sort_unstable();
        v
    };
    let sub = matrix.select(&keep);
    let d = to_dissimilarity(&sub, options.mode, embeddings)?;
    let tree = ward_linkage(&d)?;
    let n = d.len();
    let (k, elbow) = match options.k {
        KSelection::Fixed(k) => (k, None),
        KSelection::Elbow { k_min, k_max } => {
            let c = elbow_curve(&tree, &d, k_min, k_max)?;
            (c.k, Some(c))
        }
        KSelection::Auto => {
            let c = elbow_curve(&tree, &d, 1, 10.min(n - 1))?;
            (c.k, Some(c))
        }
    };
    let partition = cut_dendrogram(&tree, k)?;
    let silhouette = if k >= 2 { Some(silhouette_score(&d, &partition)?) } else { None };
    let result = ClusteringResult {
        k,
        per_cluster: partition.clusters(),
        partition,
        silhouette,
        elbow,
        mode: options.mode,
    };
    Ok((result, tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::default_registry;

    #[test]
    fn one_minus_similarity() {
        let m = SimilarityMatrix::from_upper(vec!["Go".into(), "C".into(), "Java".into()], &[1.0, 0.5, 0.25], None).unwrap();
        let d = to_dissimilarity(&m, DissimilarityMode::OneMinusSimilarity, None).unwrap();
        assert_eq!(d.value(0, 1), 0.0);
        assert_eq!(d.value(0, 2), 0.5);
        assert_eq!(d.value(1, 2), 0.75);
        assert_eq!(d.value(1, 1), 0.0);
    }

    #[test]
    fn euclidean_needs_embeddings() {
        let m = SimilarityMatrix::from_upper(vec!["Go".into(), "C".into()], &[0.5], None).unwrap();
        assert!(to_dissimilarity(&m, DissimilarityMode::EuclideanOnEmbeddings, None).is_err());
        let d = DissimilarityMatrix::euclidean_points(vec!["a".into(), "b".into()], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((d.value(0, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reference_is_excluded_by_default() {
        let reg = default_registry();
        let m = SimilarityMatrix::from_upper(
            vec!["Go".into(), "C".into(), "Haskell".into(), "Scala".into(), "English".into()],
            &[0.9, 0.2, 0.25, 0.1, 0.3, 0.2, 0.1, 0.85, 0.05, 0.05],
            None,
        )
        .unwrap();
        let opts = ClusterOptions { k: KSelection::Fixed(2), ..Default::default() };
        let (r, t) = cluster_languages(&m, &reg, &opts, None).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(r.per_cluster, vec![vec!["Go".to_string(), "C".to_string()], vec!["Haskell".to_string(), "Scala".to_string()]]);
        assert!(r.silhouette.unwrap().overall > 0.5);
        let opts = ClusterOptions { include_reference: true, k: KSelection::Fixed(1), ..Default::default() };
        let (r, t) = cluster_languages(&m, &reg, &opts, None).unwrap();
        assert_eq!(t.len(), 5);
        assert!(r.silhouette.is_none());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("one-minus-sim".parse::<DissimilarityMode>().unwrap(), DissimilarityMode::OneMinusSimilarity);
        assert_eq!("euclidean".parse::<DissimilarityMode>().unwrap(), DissimilarityMode::EuclideanOnEmbeddings);
        assert!("cosine".parse::<DissimilarityMode>().is_err());
    }
}
