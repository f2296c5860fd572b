use super::dendrogram::{Dendrogram, Merge};
use super::DissimilarityMatrix;
use crate::error::{Error, Result};

/// Absolute tolerance under which two linkage values count as tied.
pub const TIE_EPS: f64 = 1e-12;

/// Ward's minimum-variance agglomeration via the Lance–Williams update on
/// squared dissimilarities:
///
/// ```text
/// d²(i∪j, k) = [(nᵢ+nₖ)·d²(i,k) + (nⱼ+nₖ)·d²(j,k) − nₖ·d²(i,j)] / (nᵢ+nⱼ+nₖ)
/// ```
///
/// Merge heights are `d(i, j)` at merge time. Ties (within [`TIE_EPS`]) go to
/// the lexicographically smallest `(left, right)` node-id pair.
pub fn ward_linkage(d: &DissimilarityMatrix) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::DegenerateInput(n));
    }
    let total = 2 * n - 1;
    let mut sq = vec![vec![0.0f64; total]; total];
    for i in 0..n {
        for j in 0..n {
            let x = d.value(i, j);
            sq[i][j] = x * x;
        }
    }
    let mut size = vec![0usize; total];
    size[..n].fill(1);
    // Active node ids, kept sorted ascending.
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let v = sq[a][b];
                if best.is_none_or(|(_, _, bv)| v < bv - TIE_EPS) {
                    best = Some((a, b, v));
                }
            }
        }
        let (a, b, dab) = best.expect("at least two active clusters");
        let id = n + step;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * sq[a][k] + (nb + nk) * sq[b][k] - nk * dab) / (na + nb + nk);
            sq[id][k] = v;
            sq[k][id] = v;
        }
        size[id] = size[a] + size[b];
        active.retain(|&x| x != a && x != b);
        active.push(id);
        merges.push(Merge { left: a, right: b, height: dab.max(0.0).sqrt(), size: size[id] });
    }

    Dendrogram::new(d.languages().to_vec(), merges)
}
