//! Cluster-count selection and partition quality.

use serde::Serialize;

use super::dendrogram::{cut_dendrogram, Dendrogram, Partition};
use super::ward::TIE_EPS;
use super::DissimilarityMatrix;
use crate::error::{Error, Result};

/// Ward objective of a partition: for each cluster, the sum of squared
/// pairwise dissimilarities divided by the cluster size.
pub fn within_cluster_dispersion(d: &DissimilarityMatrix, partition: &Partition) -> f64 {
    partition
        .cluster_indices()
        .iter()
        .map(|members| {
            let mut s = 0.0;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    s += d.value(i, j).powi(2);
                }
            }
            s / members.len() as f64
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowCurve {
    /// `(k, W(k))` for `k` in `k_min - 1 ..= k_max + 1` (clipped at 1).
    pub dispersion: Vec<(usize, f64)>,
    /// `(k, W(k-1) - 2W(k) + W(k+1))` for each scored `k`.
    pub knee_scores: Vec<(usize, f64)>,
    pub k: usize,
}

/// Picks `k` in `[k_min, k_max]` maximizing the discrete second difference
/// of the dispersion curve. `k = 1` has no left neighbour and is never
/// scored. Ties go to the smaller `k`.
pub fn elbow_curve(dendrogram: &Dendrogram, d: &DissimilarityMatrix, k_min: usize, k_max: usize) -> Result<ElbowCurve> {
    let n = dendrogram.len();
    if k_min < 1 || k_min >= k_max || k_max + 1 > n || d.len() != n {
        return Err(Error::RangeTooNarrow { k_min, k_max, leaves: n });
    }
    let lo = k_min.max(2);
    let mut dispersion = Vec::new();
    for k in lo - 1..=k_max + 1 {
        dispersion.push((k, within_cluster_dispersion(d, &cut_dendrogram(dendrogram, k)?)));
    }
    let w = |k: usize| dispersion[k - (lo - 1)].1;
    let knee_scores: Vec<(usize, f64)> = (lo..=k_max).map(|k| (k, w(k - 1) - 2.0 * w(k) + w(k + 1))).collect();
    let mut best = knee_scores[0];
    for &(k, s) in &knee_scores[1..] {
        if s > best.1 + TIE_EPS {
            best = (k, s);
        }
    }
    Ok(ElbowCurve { dispersion, knee_scores, k: best.0 })
}

pub fn elbow_k(dendrogram: &Dendrogram, d: &DissimilarityMatrix, k_min: usize, k_max: usize) -> Result<usize> {
    elbow_curve(dendrogram, d, k_min, k_max).map(|c| c.k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Silhouette {
    pub overall: f64,
    pub per_item: Vec<f64>,
}

/// Mean silhouette `(b - a) / max(a, b)`; members of singleton clusters
/// score 0.
pub fn silhouette_score(d: &DissimilarityMatrix, partition: &Partition) -> Result<Silhouette> {
    let n = d.len();
    if partition.labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} items, matrix has {n}",
            partition.labels.len()
        )));
    }
    let clusters = partition.cluster_indices();
    if clusters.len() < 2 {
        return Err(Error::SingleCluster);
    }
    let mean_to = |i: usize, members: &[usize]| -> f64 {
        let (sum, cnt) = members.iter().filter(|&&j| j != i).fold((0.0, 0usize), |(s, c), &j| (s + d.value(i, j), c + 1));
        sum / cnt as f64
    };
    let per_item: Vec<f64> = (0..n)
        .map(|i| {
            let own = &clusters[partition.labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let a = mean_to(i, own);
            let b = clusters
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != partition.labels[i])
                .map(|(_, c)| mean_to(i, c))
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let overall = per_item.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { overall, per_item })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("labelings differ in length".into()));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < f64::EPSILON {
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{ward_linkage, DissimilaritySource};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // Hand value: contingency [[1,1],[1,1]], index 0, expected 2·2/6, max 2.
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!((ari - (0.0 - 2.0 / 3.0) / (2.0 - 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
    }

    /// Four items: {A, B} and {C, D}.
    ///
    /// ```text
    ///      A    B    C    D
    /// A    0    1    4    5
    /// B    1    0    3    4
    /// C    4    3    0    2
    /// D    5    4    2    0
    /// ```
    ///
    /// a(A)=1, b(A)=4.5 → 3.5/4.5
    /// a(B)=1, b(B)=3.5 → 2.5/3.5
    /// a(C)=2, b(C)=3.5 → 1.5/3.5
    /// a(D)=2, b(D)=4.5 → 2.5/4.5
    #[test]
    fn silhouette_hand_instance() {
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
        let p = Partition::from_raw(names(4), &[0, 0, 1, 1]);
        let s = silhouette_score(&d, &p).unwrap();
        let expected = [3.5 / 4.5, 2.5 / 3.5, 1.5 / 3.5, 2.5 / 4.5];
        for (g, e) in s.per_item.iter().zip(expected) {
            assert!((g - e).abs() < 1e-9);
        }
        assert!((s.overall - expected.iter().sum::<f64>() / 4.0).abs() < 1e-9);

        let p = Partition::from_raw(names(4), &[0, 0, 0, 1]);
        let s = silhouette_score(&d, &p).unwrap();
        assert_eq!(s.per_item[3], 0.0);

        assert!(matches!(silhouette_score(&d, &Partition::from_raw(names(4), &[0, 0, 0, 0])), Err(Error::SingleCluster)));
    }

    #[test]
    fn tight_pairs_score_near_one() {
        let d = DissimilarityMatrix::euclidean_points(names(4), &[vec![0.0], vec![0.01], vec![100.0], vec![100.01]]).unwrap();
        let s = silhouette_score(&d, &Partition::from_raw(names(4), &[0, 0, 1, 1])).unwrap();
        assert!((s.overall - 1.0).abs() < 0.05);
    }

    /// Points 0,1,2,3 on a line. Ward merges {0,1}, then {2,3}.
    /// W(1) = 5 (variance sum about 1.5), W(2) = 0.5 + 0.5, W(3) = 0.5, W(4) = 0.
    /// Knee at 2: 5 - 2 + 0.5 = 3.5; knee at 3: 1 - 1 + 0 = 0.
    #[test]
    fn equally_spaced_points_pick_smallest_k() {
        let d = DissimilarityMatrix::euclidean_points(names(4), &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t = ward_linkage(&d).unwrap();
        let c = elbow_curve(&t, &d, 2, 3).unwrap();
        let w: Vec<f64> = c.dispersion.iter().map(|(_, w)| *w).collect();
        let expected = [5.0, 1.0, 0.5, 0.0];
        for (g, e) in w.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{w:?}");
        }
        assert_eq!(c.k, 2);
        assert!((c.knee_scores[0].1 - 3.5).abs() < 1e-12);
        assert!(c.knee_scores[1].1.abs() < 1e-12);
    }

    #[test]
    fn dispersion_matches_merge_costs() {
        // Each Ward merge adds height²/2 to the dispersion.
        let pts: Vec<Vec<f64>> = [0.3, 1.9, 4.4, 8.0, 8.7, 15.2].iter().map(|&x| vec![x, x * x / 10.0]).collect();
        let d = DissimilarityMatrix::euclidean_points(names(6), &pts).unwrap();
        let t = ward_linkage(&d).unwrap();
        for k in 1..=6 {
            let w = within_cluster_dispersion(&d, &cut_dendrogram(&t, k).unwrap());
            let from_heights: f64 = t.merges()[..6 - k].iter().map(|m| m.height * m.height / 2.0).sum();
            assert!((w - from_heights).abs() < 1e-9);
        }
    }

    #[test]
    fn three_blobs() {
        let mut pts = Vec::new();
        // Equidistant centers; collinear blobs would favour k = 2.
        for (cx, cy) in [(0.0, 0.0), (50.0, 0.0), (25.0, 43.3)] {
            for (ox, oy) in [(0.0, 0.0), (1.0, 0.2), (0.3, 1.1), (0.9, 0.8)] {
                pts.push(vec![cx + ox, cy + oy]);
            }
        }
        let d = DissimilarityMatrix::euclidean_points(names(12), &pts).unwrap();
        let t = ward_linkage(&d).unwrap();
        assert_eq!(elbow_k(&t, &d, 1, 8).unwrap(), 3);
    }

    #[test]
    fn narrow_ranges() {
        let d = DissimilarityMatrix::euclidean_points(names(4), &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t = ward_linkage(&d).unwrap();
        assert!(matches!(elbow_k(&t, &d, 2, 2), Err(Error::RangeTooNarrow { .. })));
        assert!(matches!(elbow_k(&t, &d, 2, 4), Err(Error::RangeTooNarrow { .. })));
        assert!(matches!(elbow_k(&t, &d, 0, 3), Err(Error::RangeTooNarrow { .. })));
        assert_eq!(elbow_k(&t, &d, 1, 3).unwrap(), 2);
    }
}
