use serde::{Deserialize, Serialize};

use crate::attribution::{rank_by_magnitude, Attribution, Method};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProportion {
    pub index: usize,
    pub name: String,
    /// Fraction of samples with this feature in their top-k.
    pub proportion: f64,
}

/// Agreement of one attribution method with the global weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRecord {
    pub method: Method,
    pub k: usize,
    pub n_samples: usize,
    pub top_k_agreement: usize,
    pub mean_l2: f64,
    /// Samples left out of `mean_l2` because their attribution was all zero.
    pub l2_excluded: usize,
    pub mean_weighted_rank_dist: f64,
    pub global_ranking: Vec<FeatureProportion>,
}

/// Orders features by how often they land in a sample's top-k by
/// `|attribution|`. Ties break by feature index.
pub fn global_ranking_by_frequency(
    attrs: &[Attribution],
    k: usize,
    names: &[String],
) -> Result<Vec<FeatureProportion>> {
    let first = attrs
        .first()
        .ok_or_else(|| Error::Argument("no attributions to rank".into()))?;
    let d = first.len();
    check_dim(d, names.len())?;
    if k == 0 || k > d {
        return Err(Error::Argument(format!("k = {k} outside 1..={d}")));
    }
    let mut counts = vec![0usize; d];
    for a in attrs {
        check_dim(d, a.len())?;
        for &i in a.ranking().iter().take(k) {
            counts[i] += 1;
        }
    }
    let n = attrs.len() as f64;
    let mut out: Vec<FeatureProportion> = counts
        .iter()
        .enumerate()
        .map(|(index, &c)| FeatureProportion {
            index,
            name: names[index].clone(),
            proportion: c as f64 / n,
        })
        .collect();
    out.sort_by(|a, b| b.proportion.total_cmp(&a.proportion).then(a.index.cmp(&b.index)));
    Ok(out)
}

fn check_permutation(r: &[usize], d: usize) -> Result<()> {
    if r.len() != d {
        return Err(Error::Argument(format!(
            "ranking has {} entries, expected {d}",
            r.len()
        )));
    }
    let mut seen = vec![false; d];
    for &i in r {
        if i >= d || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Argument("ranking is not a permutation of the features".into()));
        }
    }
    Ok(())
}

/// Size of the overlap between the top-k of a local ranking and the top-k
/// features by `|global weight|`.
pub fn topk_concordance(local_ranking: &[usize], global_weights: &[f64], k: usize) -> Result<usize> {
    let d = global_weights.len();
    if k == 0 || k > d {
        return Err(Error::Argument(format!("k = {k} outside 1..={d}")));
    }
    check_permutation(local_ranking, d)?;
    let global = rank_by_magnitude(global_weights);
    Ok(topk_overlap(local_ranking, &global, k))
}

pub(crate) fn topk_overlap(a: &[usize], b: &[usize], k: usize) -> usize {
    let top_b = &b[..k];
    a[..k].iter().filter(|i| top_b.contains(i)).count()
}

/// Euclidean distance between `|local|` and `|global|`, each rescaled to
/// unit L1 mass. `None` when either side is all zero.
pub fn l2_distance(local: &[f64], global_weights: &[f64]) -> Result<Option<f64>> {
    check_dim(global_weights.len(), local.len())?;
    let ls: f64 = local.iter().map(|v| v.abs()).sum();
    let gs: f64 = global_weights.iter().map(|v| v.abs()).sum();
    if ls == 0.0 || gs == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        local
            .iter()
            .zip(global_weights)
            .map(|(l, g)| (l.abs() / ls - g.abs() / gs).powi(2))
            .sum::<f64>()
            .sqrt(),
    ))
}

/// Top-weighted rank distance `(1 - rho_w) / 2` in `[0, 1]`.
///
/// `rho_w` is the weighted Pearson correlation of the two rank vectors,
/// with feature weights proportional to `1 / global rank` (normalized to
/// sum 1). Identical rankings give 0 and reversed rankings give 1.
/// Rankings list feature indices, most important first.
pub fn weighted_spearman_distance(local_ranking: &[usize], global_ranking: &[usize]) -> Result<f64> {
    let d = global_ranking.len();
    check_permutation(global_ranking, d)?;
    check_permutation(local_ranking, d)?;
    if d < 2 {
        return Ok(0.0);
    }
    let mut rg = vec![0.0; d];
    let mut rl = vec![0.0; d];
    for (pos, &f) in global_ranking.iter().enumerate() {
        rg[f] = (pos + 1) as f64;
    }
    for (pos, &f) in local_ranking.iter().enumerate() {
        rl[f] = (pos + 1) as f64;
    }
    let norm: f64 = (1..=d).map(|r| 1.0 / r as f64).sum();
    let w: Vec<f64> = rg.iter().map(|r| 1.0 / r / norm).collect();
    let mg: f64 = w.iter().zip(&rg).map(|(w, r)| w * r).sum();
    let ml: f64 = w.iter().zip(&rl).map(|(w, r)| w * r).sum();
    let (mut cov, mut vg, mut vl) = (0.0, 0.0, 0.0);
    for i in 0..d {
        let (a, b) = (rg[i] - mg, rl[i] - ml);
        cov += w[i] * a * b;
        vg += w[i] * a * a;
        vl += w[i] * b * b;
    }
    let rho = (cov / (vg * vl).sqrt()).clamp(-1.0, 1.0);
    Ok(((1.0 - rho) / 2.0).clamp(0.0, 1.0))
}

/// Plain Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::Argument("need at least two points".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numerical("spearman correlation of a constant vector".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&x, &y| v[x].total_cmp(&v[y]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concordance_extremes() {
        let w = [5.0, -4.0, 3.0, 0.1, 0.2, 0.3];
        assert_eq!(topk_concordance(&[0, 1, 2, 3, 4, 5], &w, 3).unwrap(), 3);
        assert_eq!(topk_concordance(&[5, 4, 3, 2, 1, 0], &w, 3).unwrap(), 0);
        assert!(topk_concordance(&[0, 1, 2, 3, 4, 5], &w, 7).is_err());
        assert!(topk_concordance(&[0, 0, 2, 3, 4, 5], &w, 2).is_err());
    }

    #[test]
    fn l2_cases() {
        assert_eq!(l2_distance(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), Some(0.0));
        let d = l2_distance(&[0.0, 3.0], &[-7.0, 0.0]).unwrap().unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l2_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), None);
    }

    #[test]
    fn rank_distance_identity_and_reversal() {
        let r: Vec<usize> = (0..7).collect();
        assert_eq!(weighted_spearman_distance(&r, &r).unwrap(), 0.0);
        let rev: Vec<usize> = r.iter().rev().copied().collect();
        assert!((weighted_spearman_distance(&rev, &r).unwrap() - 1.0).abs() < 1e-12);
        assert!(weighted_spearman_distance(&[0, 1, 1], &[0, 1, 2]).is_err());
    }

    #[test]
    fn spearman_with_ties() {
        let s = spearman(&[1.0, 2.0, 2.0, 4.0], &[10.0, 20.0, 20.0, 40.0]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
