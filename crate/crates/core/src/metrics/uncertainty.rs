use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method};
use crate::error::{Error, Result};
use crate::reference::ReferencePolicy;

/// Spread of one candidate's attributions across K references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub candidate_id: usize,
    pub method: Method,
    pub policy: ReferencePolicy,
    pub k: usize,
    pub entropy: Vec<f64>,
    pub std: Vec<f64>,
    pub mean_entropy: f64,
    pub mean_std: f64,
    /// Features whose attributions were zero under every reference.
    pub zero_features: Vec<usize>,
}

impl UncertaintyRecord {
    pub fn from_attributions(candidate_id: usize, policy: ReferencePolicy, attrs: &[Attribution]) -> Result<Self> {
        let entropy = attribution_entropy(attrs)?;
        let std = attribution_std(attrs)?;
        let d = entropy.entropy.len() as f64;
        Ok(Self {
            candidate_id,
            method: attrs[0].method,
            policy,
            k: attrs.len(),
            mean_entropy: entropy.entropy.iter().sum::<f64>() / d,
            mean_std: std.iter().sum::<f64>() / d,
            entropy: entropy.entropy,
            std,
            zero_features: entropy.zero_features,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntropy {
    pub entropy: Vec<f64>,
    pub zero_features: Vec<usize>,
}

/// Largest attainable per-feature entropy for K references, `ln(K)/K`.
pub fn max_entropy(k: usize) -> f64 {
    (k as f64).ln() / k as f64
}

fn check_group(attrs: &[Attribution]) -> Result<()> {
    if attrs.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 attributions, got {}",
            attrs.len()
        )));
    }
    let first = &attrs[0];
    if attrs
        .iter()
        .any(|a| a.method != first.method || a.candidate_id != first.candidate_id || a.len() != first.len())
    {
        return Err(Error::Argument(
            "attributions must share method, candidate and length".into(),
        ));
    }
    Ok(())
}

/// Per-feature entropy of a candidate's attributions across references.
///
/// For each feature the magnitudes `|A_j|` are normalized to sum to one
/// over the K references and scored as `-(1/K) sum_j p_j ln p_j`, with
/// `0 ln 0 = 0`. A feature that is zero under every reference scores 0 and
/// is listed in `zero_features`.
pub fn attribution_entropy(attrs: &[Attribution]) -> Result<FeatureEntropy> {
    check_group(attrs)?;
    let rows: Vec<&[f64]> = attrs.iter().map(|a| a.values.as_slice()).collect();
    entropy_of(&rows)
}

/// [`attribution_entropy`] over raw value rows (one row per reference).
pub fn entropy_of(rows: &[&[f64]]) -> Result<FeatureEntropy> {
    let k = rows.len();
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 attributions, got {k}")));
    }
    let d = rows[0].len();
    let mut out = FeatureEntropy {
        entropy: Vec::with_capacity(d),
        zero_features: Vec::new(),
    };
    for i in 0..d {
        let total: f64 = rows.iter().map(|r| r[i].abs()).sum();
        if total == 0.0 {
            out.entropy.push(0.0);
            out.zero_features.push(i);
            continue;
        }
        let h: f64 = rows
            .iter()
            .map(|r| r[i].abs() / total)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        out.entropy.push(h / k as f64);
    }
    Ok(out)
}

/// Population standard deviation of each feature's signed attribution
/// across references.
pub fn attribution_std(attrs: &[Attribution]) -> Result<Vec<f64>> {
    check_group(attrs)?;
    let rows: Vec<&[f64]> = attrs.iter().map(|a| a.values.as_slice()).collect();
    Ok(std_of(&rows))
}

pub fn std_of(rows: &[&[f64]]) -> Vec<f64> {
    let k = rows.len() as f64;
    let d = rows.first().map_or(0, |r| r.len());
    (0..d)
        .map(|i| {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / k;
            (rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / k).sqrt()
        })
        .collect()
}
