//! Reference-point generation: uniform random baselines, baselines on the
//! decision boundary, the nearest boundary points to a candidate, and a
//! small catalog of intuitive credit profiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, ScalerParams};
use crate::error::{check_dim, Error, Result};
use crate::model::Classifier;
use crate::rng::rng_from;

/// Default half-width of the boundary band around `p_bad = 0.5`.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Number of references in a tight set.
pub const TIGHT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePolicy {
    Random,
    Boundary,
    Tight,
    NamedProfile,
}

impl ReferencePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferencePolicy::Random => "random",
            ReferencePolicy::Boundary => "boundary",
            ReferencePolicy::Tight => "tight",
            ReferencePolicy::NamedProfile => "named_profile",
        }
    }
}

impl std::fmt::Display for ReferencePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a boundary pool member came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum PoolSource {
    Dataset(usize),
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub values: Vec<f64>,
    pub source: PoolSource,
}

/// Points satisfying `|p_bad - 0.5| <= epsilon`, dataset rows first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPool {
    pub members: Vec<PoolMember>,
    pub epsilon: f64,
    pub dataset_count: usize,
    pub sampled_count: usize,
    pub sample_acceptance_rate: Option<f64>,
}

/// K reference vectors in standardized space plus generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub policy: ReferencePolicy,
    pub ids: Vec<String>,
    pub references: Vec<Vec<f64>>,
    /// The same vectors in raw units; empty until [`ReferenceSet::with_raw`].
    pub raw: Vec<Vec<f64>>,
    /// `[p_good, p_bad]` per reference; empty until evaluated.
    pub outputs: Vec<[f64; 2]>,
    pub anchor: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub acceptance_rate: Option<f64>,
    /// Tight sets: distance of each member to the anchor, non-decreasing.
    pub distances: Vec<f64>,
    pub sources: Vec<PoolSource>,
}

impl ReferenceSet {
    fn empty(policy: ReferencePolicy) -> Self {
        Self {
            policy,
            ids: Vec::new(),
            references: Vec::new(),
            raw: Vec::new(),
            outputs: Vec::new(),
            anchor: None,
            epsilon: None,
            seed: None,
            acceptance_rate: None,
            distances: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    /// Fills `outputs` from `model`.
    pub fn evaluate<M: Classifier + ?Sized>(mut self, model: &M) -> Result<Self> {
        self.outputs = self
            .references
            .iter()
            .map(|r| model.predict_proba(r))
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn with_raw(mut self, scaler: &ScalerParams) -> Result<Self> {
        self.raw = self
            .references
            .iter()
            .map(|r| scaler.to_raw(r))
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn to_references(&self) -> Vec<crate::attribution::Reference> {
        self.ids
            .iter()
            .zip(&self.references)
            .map(|(id, v)| crate::attribution::Reference {
                id: id.clone(),
                values: v.clone(),
            })
            .collect()
    }
}

fn uniform_raw<R: Rng>(scaler: &ScalerParams, rng: &mut R) -> Vec<f64> {
    scaler
        .min
        .iter()
        .zip(&scaler.max)
        .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// `k` points drawn uniformly in each feature's raw `[min, max]`, then
/// standardized.
pub fn random_references(scaler: &ScalerParams, k: usize, seed: u64) -> Result<ReferenceSet> {
    if k == 0 {
        return Err(Error::Argument("need at least one reference".into()));
    }
    let mut rng = rng_from(seed);
    let mut set = ReferenceSet::empty(ReferencePolicy::Random);
    set.seed = Some(seed);
    for j in 0..k {
        let raw = uniform_raw(scaler, &mut rng);
        set.references.push(scaler.to_standard(&raw)?);
        set.raw.push(raw);
        set.ids.push(format!("random-{j}"));
    }
    Ok(set)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(Error::Argument(format!("epsilon must lie in (0, 0.5], got {eps}")))
    }
}

/// Rejection-samples uniform random references until `k` land within
/// `epsilon` of `p_bad = 0.5`.
pub fn boundary_references<M: Classifier + ?Sized>(
    model: &M,
    scaler: &ScalerParams,
    k: usize,
    epsilon: f64,
    seed: u64,
    max_tries: usize,
) -> Result<ReferenceSet> {
    if k == 0 {
        return Err(Error::Argument("need at least one reference".into()));
    }
    check_epsilon(epsilon)?;
    check_dim(scaler.n_features(), model.n_features())?;
    let mut rng = rng_from(seed);
    let mut set = ReferenceSet::empty(ReferencePolicy::Boundary);
    set.seed = Some(seed);
    set.epsilon = Some(epsilon);
    let mut tries = 0;
    while set.len() < k && tries < max_tries {
        tries += 1;
        let raw = uniform_raw(scaler, &mut rng);
        let z = scaler.to_standard(&raw)?;
        let p = model.predict_proba(&z)?;
        if (p[1] - 0.5).abs() <= epsilon {
            set.ids.push(format!("boundary-{}", set.len()));
            set.references.push(z);
            set.raw.push(raw);
            set.outputs.push(p);
        }
    }
    if set.len() < k {
        return Err(Error::Exhausted {
            found: set.len(),
            wanted: k,
            hint: format!("no more hits in {max_tries} draws; try a larger epsilon than {epsilon}"),
        });
    }
    set.acceptance_rate = Some(set.len() as f64 / tries as f64);
    Ok(set)
}

/// Boundary rows of `table` (standardized), topped up with sampled
/// boundary references until the pool holds at least `min_size` points.
pub fn build_boundary_pool<M: Classifier + ?Sized>(
    model: &M,
    table: &FeatureTable,
    scaler: &ScalerParams,
    epsilon: f64,
    min_size: usize,
    seed: u64,
    max_tries: usize,
) -> Result<BoundaryPool> {
    check_epsilon(epsilon)?;
    let mut members = Vec::new();
    for (i, row) in table.rows().enumerate() {
        if (model.p_bad(row)? - 0.5).abs() <= epsilon {
            members.push(PoolMember {
                values: row.to_vec(),
                source: PoolSource::Dataset(i),
            });
        }
    }
    let dataset_count = members.len();
    let mut acceptance = None;
    if dataset_count < min_size {
        let extra = boundary_references(model, scaler, min_size - dataset_count, epsilon, seed, max_tries)?;
        acceptance = extra.acceptance_rate;
        members.extend(extra.references.into_iter().enumerate().map(|(j, values)| PoolMember {
            values,
            source: PoolSource::Sampled(j),
        }));
    }
    let sampled_count = members.len() - dataset_count;
    Ok(BoundaryPool {
        members,
        epsilon,
        dataset_count,
        sampled_count,
        sample_acceptance_rate: acceptance,
    })
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// The `k` pool members nearest to `x` (Euclidean, standardized space),
/// restricted to members that satisfy the `epsilon` band under `model`.
/// Ties break by pool index.
pub fn tight_references<M: Classifier + ?Sized>(
    model: &M,
    pool: &[PoolMember],
    x: &[f64],
    k: usize,
    epsilon: f64,
) -> Result<ReferenceSet> {
    check_epsilon(epsilon)?;
    check_dim(model.n_features(), x.len())?;
    if k == 0 {
        return Err(Error::Argument("need at least one reference".into()));
    }
    let mut ranked = Vec::with_capacity(pool.len());
    for (i, m) in pool.iter().enumerate() {
        check_dim(x.len(), m.values.len())?;
        let p = model.predict_proba(&m.values)?;
        if (p[1] - 0.5).abs() <= epsilon {
            ranked.push((euclidean(x, &m.values), i, p));
        }
    }
    if ranked.len() < k {
        return Err(Error::Exhausted {
            found: ranked.len(),
            wanted: k,
            hint: "boundary pool too small; enlarge it or raise epsilon".into(),
        });
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut set = ReferenceSet::empty(ReferencePolicy::Tight);
    set.epsilon = Some(epsilon);
    set.anchor = Some(x.to_vec());
    for (dist, i, p) in ranked.into_iter().take(k) {
        set.ids.push(format!("tight-{i}"));
        set.references.push(pool[i].values.clone());
        set.outputs.push(p);
        set.distances.push(dist);
        set.sources.push(pool[i].source);
    }
    Ok(set)
}

/// Table-2 style summary of a profile in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub delinquencies: Option<f64>,
    pub credit_history_years: Option<f64>,
    pub credit_trades: Option<f64>,
    /// `None` renders as NA: undefined without any trades.
    pub percent_accounts_with_balance: Option<f64>,
    pub inquiries_last_6m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub standardized: Vec<f64>,
    pub raw: Vec<f64>,
    pub sigma: [f64; 2],
    pub summary: ProfileSummary,
}

/// Features zeroed for an applicant without credit history.
const NO_HISTORY_ZERO: [&str; 19] = [
    "MSinceOldestTradeOpen",
    "MSinceMostRecentTradeOpen",
    "AverageMInFile",
    "NumSatisfactoryTrades",
    "NumTrades60Ever2DerogPubRec",
    "NumTrades90Ever2DerogPubRec",
    "PercentTradesNeverDelq",
    "NumTotalTrades",
    "NumTradesOpeninLast12M",
    "PercentInstallTrades",
    "MSinceMostRecentInqexcl7days",
    "NumInqLast6M",
    "NumInqLast6Mexcl7days",
    "NetFractionRevolvingBurden",
    "NetFractionInstallBurden",
    "NumRevolvingTradesWBalance",
    "NumInstallTradesWBalance",
    "NumBank2NatlTradesWHighUtilization",
    "PercentTradesWBalance",
];

pub fn summarize_profile(names: &[String], raw: &[f64]) -> ProfileSummary {
    let get = |name: &str| names.iter().position(|n| n == name).map(|i| raw[i]);
    let trades = get("NumTotalTrades");
    ProfileSummary {
        delinquencies: get("NumTrades60Ever2DerogPubRec"),
        credit_history_years: get("MSinceOldestTradeOpen").map(|m| m / 12.0),
        credit_trades: trades,
        percent_accounts_with_balance: match trades {
            Some(t) if t <= 0.0 => None,
            _ => get("PercentTradesWBalance"),
        },
        inquiries_last_6m: get("NumInqLast6M"),
    }
}

/// Parameters for the boundary draw behind the "unclassifiable" profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogOptions {
    pub epsilon: f64,
    pub seed: u64,
    pub max_tries: usize,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            max_tries: 2_000_000,
        }
    }
}

/// The three intuitive reference profiles: a boundary point, the average
/// applicant of `table` (standardized), and an applicant with no history.
pub fn profile_catalog<M: Classifier + ?Sized>(
    model: &M,
    table: &FeatureTable,
    scaler: &ScalerParams,
    opts: CatalogOptions,
) -> Result<Vec<Profile>> {
    check_dim(scaler.n_features(), table.n_features())?;
    let names = scaler.feature_names();
    let mut out = Vec::with_capacity(3);

    let boundary = boundary_references(model, scaler, 1, opts.epsilon, opts.seed, opts.max_tries)?;
    out.push(make_profile(
        model,
        "unclassifiable",
        &names,
        boundary.references[0].clone(),
        scaler,
    )?);

    let average = table.column_means();
    out.push(make_profile(
        model,
        "average candidate",
        &names,
        average.clone(),
        scaler,
    )?);

    let mut raw = scaler.to_raw(&average)?;
    for (i, n) in names.iter().enumerate() {
        if NO_HISTORY_ZERO.contains(&n.as_str()) {
            raw[i] = 0.0;
        }
    }
    out.push(make_profile(
        model,
        "new candidate",
        &names,
        scaler.to_standard(&raw)?,
        scaler,
    )?);
    Ok(out)
}

fn make_profile<M: Classifier + ?Sized>(
    model: &M,
    name: &str,
    names: &[String],
    standardized: Vec<f64>,
    scaler: &ScalerParams,
) -> Result<Profile> {
    let raw = scaler.to_raw(&standardized)?;
    Ok(Profile {
        name: name.to_string(),
        sigma: model.predict_proba(&standardized)?,
        summary: summarize_profile(names, &raw),
        standardized,
        raw,
    })
}
