//! Reliability: how much does a candidate's explanation move when only the
//! reference point changes?

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::uncertainty::{max_entropy, UncertaintyRecord};
use crate::attribution::{deeplift_rescale, integrated_gradients, Attribution, Candidate, Method};
use crate::dataset::{FeatureTable, ScalerParams};
use crate::error::{Error, Result};
use crate::model::{MlpModel, OutputTarget};
use crate::reference::{
    boundary_references, build_boundary_pool, random_references, tight_references, BoundaryPool, PoolSource,
    ReferencePolicy, ReferenceSet, DEFAULT_EPSILON, TIGHT_K,
};
use crate::rng::derive_seed;

/// Width of the entropy histogram bins.
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Config {
    pub k_random: usize,
    pub k_boundary: usize,
    pub k_tight: usize,
    pub epsilon: f64,
    pub ig_steps: usize,
    pub methods: Vec<Method>,
    pub target: OutputTarget,
    pub seed: u64,
    pub max_tries: usize,
    /// The tight pool is topped up with sampled boundary points to at
    /// least this size.
    pub pool_min_size: usize,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Self {
            k_random: 20,
            k_boundary: 20,
            k_tight: TIGHT_K,
            epsilon: DEFAULT_EPSILON,
            ig_steps: 100,
            methods: vec![Method::IntegratedGradients, Method::DeepLift],
            target: OutputTarget::Probability,
            seed: 0,
            max_tries: 5_000_000,
            pool_min_size: 100,
        }
    }
}

pub struct Exp2Setup<'a> {
    pub model: &'a MlpModel,
    pub scaler: &'a ScalerParams,
    /// Standardized rows searched for boundary points (tight policy).
    pub pool_table: &'a FeatureTable,
    /// Candidates whose ids index rows of `pool_table`; a candidate never
    /// serves as its own tight reference.
    pub candidates: &'a [Candidate],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub policy: ReferencePolicy,
    pub k: usize,
    pub acceptance_rate: Option<f64>,
    pub pool_dataset_members: Option<usize>,
    pub pool_sampled_members: Option<usize>,
    pub mean_p_bad: Option<f64>,
}

/// One cell pair of the policy x method table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub method: Method,
    pub policy: ReferencePolicy,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub policy: ReferencePolicy,
    pub method: Method,
    pub bin_start: f64,
    pub bin_end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Report {
    pub config: Exp2Config,
    /// Per-candidate means over features, then means over candidates.
    pub aggregation: String,
    pub references: Vec<ReferenceSummary>,
    pub records: Vec<UncertaintyRecord>,
    pub aggregate: Vec<AggregateCell>,
    pub histogram: Vec<HistogramBin>,
}

impl Exp2Report {
    pub fn cell(&self, method: Method, policy: ReferencePolicy, metric: &str) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|c| c.method == method && c.policy == policy && c.metric == metric)
            .map(|c| c.value)
    }
}

const POLICIES: [ReferencePolicy; 3] = [
    ReferencePolicy::Random,
    ReferencePolicy::Boundary,
    ReferencePolicy::Tight,
];

fn attribute(
    model: &MlpModel,
    method: Method,
    cand: &Candidate,
    set: &ReferenceSet,
    cfg: &Exp2Config,
) -> Result<Vec<Attribution>> {
    set.to_references()
        .into_iter()
        .map(|r| {
            let a = match method {
                Method::IntegratedGradients => {
                    integrated_gradients(model, &cand.features, &r.values, cfg.ig_steps, cfg.target)?
                }
                Method::DeepLift => deeplift_rescale(model, &cand.features, &r.values, cfg.target)?,
                Method::Lime => {
                    return Err(Error::Argument("LIME takes no reference point".into()));
                }
            };
            Ok(a.with_ids(Some(cand.id), Some(r.id)))
        })
        .collect()
}

fn summarize(set: &ReferenceSet, pool: Option<&BoundaryPool>) -> ReferenceSummary {
    ReferenceSummary {
        policy: set.policy,
        k: set.len(),
        acceptance_rate: set.acceptance_rate.or(pool.and_then(|p| p.sample_acceptance_rate)),
        pool_dataset_members: pool.map(|p| p.dataset_count),
        pool_sampled_members: pool.map(|p| p.sampled_count),
        mean_p_bad: (!set.outputs.is_empty())
            .then(|| set.outputs.iter().map(|o| o[1]).sum::<f64>() / set.outputs.len() as f64),
    }
}

/// For every candidate, policy and method: K attributions against K
/// references, summarized as per-feature entropy and standard deviation.
///
/// The random and boundary sets are drawn once and shared by all
/// candidates; the tight set is the `k_tight` boundary pool members
/// nearest each candidate.
pub fn run_experiment2(setup: &Exp2Setup<'_>, cfg: &Exp2Config) -> Result<Exp2Report> {
    if setup.candidates.is_empty() {
        return Err(Error::Argument("no candidates".into()));
    }
    if cfg.methods.is_empty() || cfg.methods.contains(&Method::Lime) {
        return Err(Error::Argument(
            "methods must be a non-empty subset of {ig, deeplift}".into(),
        ));
    }
    if cfg.k_random < 2 || cfg.k_boundary < 2 || cfg.k_tight < 2 {
        return Err(Error::Argument("each policy needs K >= 2".into()));
    }
    let model = setup.model;
    let random = random_references(setup.scaler, cfg.k_random, derive_seed(cfg.seed, 1))?.evaluate(model)?;
    let boundary = boundary_references(
        model,
        setup.scaler,
        cfg.k_boundary,
        cfg.epsilon,
        derive_seed(cfg.seed, 2),
        cfg.max_tries,
    )?;
    let pool = build_boundary_pool(
        model,
        setup.pool_table,
        setup.scaler,
        cfg.epsilon,
        cfg.pool_min_size.max(cfg.k_tight + 1),
        derive_seed(cfg.seed, 3),
        cfg.max_tries,
    )?;

    let per_candidate: Vec<Result<Vec<UncertaintyRecord>>> = setup
        .candidates
        .par_iter()
        .map(|cand| {
            let own = PoolSource::Dataset(cand.id);
            let members: Vec<_> = pool.members.iter().filter(|m| m.source != own).cloned().collect();
            let tight = tight_references(model, &members, &cand.features, cfg.k_tight, cfg.epsilon)?;
            let mut out = Vec::with_capacity(POLICIES.len() * cfg.methods.len());
            for (policy, set) in POLICIES.iter().zip([&random, &boundary, &tight]) {
                for &method in &cfg.methods {
                    let attrs = attribute(model, method, cand, set, cfg)?;
                    out.push(UncertaintyRecord::from_attributions(cand.id, *policy, &attrs)?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::with_capacity(setup.candidates.len() * POLICIES.len() * cfg.methods.len());
    for r in per_candidate {
        records.extend(r?);
    }

    let mut aggregate = Vec::new();
    let mut histogram = Vec::new();
    for &method in &cfg.methods {
        for policy in POLICIES {
            let group: Vec<&UncertaintyRecord> = records
                .iter()
                .filter(|r| r.method == method && r.policy == policy)
                .collect();
            let n = group.len() as f64;
            aggregate.push(AggregateCell {
                method,
                policy,
                metric: "entropy".into(),
                value: group.iter().map(|r| r.mean_entropy).sum::<f64>() / n,
            });
            aggregate.push(AggregateCell {
                method,
                policy,
                metric: "std".into(),
                value: group.iter().map(|r| r.mean_std).sum::<f64>() / n,
            });
            let k = group[0].k;
            let top = max_entropy(k);
            let n_bins = ((top / HISTOGRAM_BIN_WIDTH).ceil() as usize).max(1);
            let mut counts = vec![0usize; n_bins];
            for r in &group {
                let b = ((r.mean_entropy / HISTOGRAM_BIN_WIDTH).floor() as usize).min(n_bins - 1);
                counts[b] += 1;
            }
            histogram.extend(counts.into_iter().enumerate().map(|(b, count)| HistogramBin {
                policy,
                method,
                bin_start: round_bin(b as f64 * HISTOGRAM_BIN_WIDTH),
                bin_end: round_bin(((b + 1) as f64 * HISTOGRAM_BIN_WIDTH).min(top)),
                count,
            }));
        }
    }

    // Summaries of the tight policy describe the pool, not a single set.
    let tight_summary = ReferenceSummary {
        policy: ReferencePolicy::Tight,
        k: cfg.k_tight,
        acceptance_rate: pool.sample_acceptance_rate,
        pool_dataset_members: Some(pool.dataset_count),
        pool_sampled_members: Some(pool.sampled_count),
        mean_p_bad: None,
    };
    Ok(Exp2Report {
        config: cfg.clone(),
        aggregation: "mean over features per candidate, then mean over candidates".into(),
        references: vec![summarize(&random, None), summarize(&boundary, None), tight_summary],
        records,
        aggregate,
        histogram,
    })
}

fn round_bin(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}
