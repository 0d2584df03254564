//! Trustworthiness: do local attributions agree with the logistic
//! regression's global weights?

use serde::{Deserialize, Serialize};

use super::trust::{global_ranking_by_frequency, l2_distance, topk_overlap, weighted_spearman_distance, TrustRecord};
use crate::attribution::{rank_by_magnitude, Attribution, Method};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone)]
pub struct Exp1Input<'a> {
    pub feature_names: &'a [String],
    pub global_weights: &'a [f64],
    pub methods: Vec<(Method, &'a [Attribution])>,
    /// Per-feature mutual information with the target, if computed.
    pub mutual_information: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWeight {
    pub index: usize,
    pub name: String,
    pub value: f64,
}

/// Does the mutual-information ranking agree with the global weights?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiCrossCheck {
    pub ranking: Vec<RankedWeight>,
    pub top_k_agreement_with_weights: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Report {
    pub k: usize,
    pub weight_ranking: Vec<RankedWeight>,
    pub trust: Vec<TrustRecord>,
    pub mutual_information: Option<MiCrossCheck>,
}

fn ranked(values: &[f64], names: &[String]) -> Vec<RankedWeight> {
    rank_by_magnitude(values)
        .into_iter()
        .map(|i| RankedWeight {
            index: i,
            name: names[i].clone(),
            value: values[i],
        })
        .collect()
}

pub fn run_experiment1(input: &Exp1Input<'_>, k: usize) -> Result<Exp1Report> {
    let d = input.global_weights.len();
    check_dim(d, input.feature_names.len())?;
    if k == 0 || k > d {
        return Err(Error::Argument(format!("k = {k} outside 1..={d}")));
    }
    let global_order = rank_by_magnitude(input.global_weights);
    let mut trust = Vec::with_capacity(input.methods.len());
    for (method, attrs) in &input.methods {
        let ranking = global_ranking_by_frequency(attrs, k, input.feature_names)?;
        let order: Vec<usize> = ranking.iter().map(|f| f.index).collect();
        let mut l2_sum = 0.0;
        let mut l2_n = 0usize;
        let mut rank_sum = 0.0;
        for a in attrs.iter() {
            if let Some(v) = l2_distance(&a.values, input.global_weights)? {
                l2_sum += v;
                l2_n += 1;
            }
            rank_sum += weighted_spearman_distance(&a.ranking(), &global_order)?;
        }
        trust.push(TrustRecord {
            method: *method,
            k,
            n_samples: attrs.len(),
            top_k_agreement: topk_overlap(&order, &global_order, k),
            mean_l2: if l2_n > 0 { l2_sum / l2_n as f64 } else { f64::NAN },
            l2_excluded: attrs.len() - l2_n,
            mean_weighted_rank_dist: rank_sum / attrs.len() as f64,
            global_ranking: ranking,
        });
    }
    let mutual_information = match &input.mutual_information {
        Some(mi) => {
            check_dim(d, mi.len())?;
            let mi_order = rank_by_magnitude(mi);
            Some(MiCrossCheck {
                ranking: ranked(mi, input.feature_names),
                top_k_agreement_with_weights: topk_overlap(&mi_order, &global_order, k),
            })
        }
        None => None,
    };
    Ok(Exp1Report {
        k,
        weight_ranking: ranked(input.global_weights, input.feature_names),
        trust,
        mutual_information,
    })
}
