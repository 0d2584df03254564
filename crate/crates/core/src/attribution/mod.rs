//! Local explanations of a single prediction: Integrated Gradients,
//! DeepLIFT (rescale rule) and a LIME-style weighted ridge surrogate.

mod deeplift;
mod ig;
mod lime;

pub use deeplift::{deeplift_multipliers, deeplift_rescale};
pub use ig::{integrated_gradients, integrated_gradients_uniform, DEFAULT_IG_STEPS, MAX_IG_STEPS};
pub use lime::{lime_explain, LimeConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Classifier, MlpModel, OutputTarget};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ig")]
    IntegratedGradients,
    #[serde(rename = "deeplift")]
    DeepLift,
    #[serde(rename = "lime")]
    Lime,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::IntegratedGradients, Method::DeepLift, Method::Lime];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IntegratedGradients => "ig",
            Method::DeepLift => "deeplift",
            Method::Lime => "lime",
        }
    }

    pub fn needs_reference(self) -> bool {
        self != Method::Lime
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ig" | "integrated_gradients" | "integrated-gradients" => Ok(Method::IntegratedGradients),
            "deeplift" => Ok(Method::DeepLift),
            "lime" => Ok(Method::Lime),
            other => Err(Error::Argument(format!("unknown attribution method `{other}`"))),
        }
    }
}

/// Per-feature explanation of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub method: Method,
    pub target: OutputTarget,
    pub candidate_id: Option<usize>,
    pub candidate: Vec<f64>,
    pub reference_id: Option<String>,
    pub reference: Option<Vec<f64>>,
    /// IG steps or LIME perturbations; 1 for DeepLIFT.
    pub steps_or_samples: usize,
    /// `sum(values) - (F(x) - F(reference))`; absent for LIME.
    pub completeness_residual: Option<f64>,
}

/// Serialized attribution row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub candidate_id: Option<usize>,
    pub method: Method,
    pub target: OutputTarget,
    pub reference_id: Option<String>,
    pub values: Vec<f64>,
    pub completeness_residual: Option<f64>,
}

impl Attribution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn with_ids(mut self, candidate_id: Option<usize>, reference_id: Option<String>) -> Self {
        self.candidate_id = candidate_id;
        self.reference_id = reference_id;
        self
    }

    pub fn to_row(&self) -> AttributionRow {
        AttributionRow {
            candidate_id: self.candidate_id,
            method: self.method,
            target: self.target,
            reference_id: self.reference_id.clone(),
            values: self.values.clone(),
            completeness_residual: self.completeness_residual,
        }
    }

    /// Feature indices ordered by decreasing `|value|`, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        rank_by_magnitude(&self.values)
    }
}

pub fn rank_by_magnitude(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

/// A labelled reference point in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub features: Vec<f64>,
}

/// Method plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Explainer {
    IntegratedGradients { steps: usize },
    DeepLift,
    Lime(LimeConfig),
}

impl Explainer {
    pub fn method(&self) -> Method {
        match self {
            Explainer::IntegratedGradients { .. } => Method::IntegratedGradients,
            Explainer::DeepLift => Method::DeepLift,
            Explainer::Lime(_) => Method::Lime,
        }
    }

    /// Explains one candidate. LIME ignores `reference` and draws its
    /// perturbations from a stream keyed by `candidate_id`.
    pub fn explain(
        &self,
        model: &MlpModel,
        candidate_id: usize,
        x: &[f64],
        reference: Option<&Reference>,
        target: OutputTarget,
    ) -> Result<Attribution> {
        let need_ref =
            || reference.ok_or_else(|| Error::Argument(format!("{} needs a reference point", self.method())));
        let attribution = match self {
            Explainer::IntegratedGradients { steps } => {
                integrated_gradients(model, x, &need_ref()?.values, *steps, target)?
            }
            Explainer::DeepLift => deeplift_rescale(model, x, &need_ref()?.values, target)?,
            Explainer::Lime(cfg) => {
                let cfg = LimeConfig {
                    seed: derive_seed(cfg.seed, candidate_id as u64),
                    ..cfg.clone()
                };
                let mut a = lime_explain(|z| model.output(z, target), x, &cfg)?;
                a.target = target;
                a
            }
        };
        let ref_id = if self.method().needs_reference() {
            reference.map(|r| r.id.clone())
        } else {
            None
        };
        Ok(attribution.with_ids(Some(candidate_id), ref_id))
    }
}

/// How a batch resolves its reference points.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferencePlan {
    None,
    Shared(Reference),
    /// One reference per candidate, aligned by position.
    PerCandidate(Vec<Reference>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub index: usize,
    pub candidate_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Successful attributions in candidate order.
    pub attributions: Vec<Attribution>,
    pub failures: Vec<BatchFailure>,
}

/// Explains every candidate, in parallel on the current rayon pool.
///
/// Output order follows `candidates` and does not depend on the thread
/// count. A failing candidate is recorded and the rest still run.
pub fn explain_batch(
    model: &MlpModel,
    candidates: &[Candidate],
    explainer: &Explainer,
    references: &ReferencePlan,
    target: OutputTarget,
) -> Result<BatchOutcome> {
    if let ReferencePlan::PerCandidate(refs) = references {
        if refs.len() != candidates.len() {
            return Err(Error::Argument(format!(
                "{} references for {} candidates",
                refs.len(),
                candidates.len()
            )));
        }
    }
    let results: Vec<Result<Attribution>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let r = match references {
                ReferencePlan::None => None,
                ReferencePlan::Shared(r) => Some(r),
                ReferencePlan::PerCandidate(refs) => Some(&refs[i]),
            };
            explainer.explain(model, c.id, &c.features, r, target)
        })
        .collect();

    let mut out = BatchOutcome {
        attributions: Vec::with_capacity(candidates.len()),
        failures: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(a) => out.attributions.push(a),
            Err(e) => out.failures.push(BatchFailure {
                index: i,
                candidate_id: candidates[i].id,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// `sum(values) - (F(x) - F(r))` for the chosen output.
pub(crate) fn completeness_residual<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    reference: &[f64],
    values: &[f64],
    target: OutputTarget,
) -> Result<f64> {
    let delta = model.output(x, target)? - model.output(reference, target)?;
    Ok(values.iter().sum::<f64>() - delta)
}
