//! Credit-risk classifiers and the tooling to explain and benchmark their
//! individual predictions.
//!
//! The pipeline: load or synthesize a HELOC-style table ([`dataset`]),
//! train a logistic regression and a small rectifier network ([`model`]),
//! explain single predictions with Integrated Gradients, DeepLIFT or a
//! LIME surrogate ([`attribution`]) against reference points drawn by
//! [`reference`], and score the explanations ([`metrics`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod dataset;
mod error;
pub mod metrics;
pub mod model;
pub mod reference;
pub mod report;
pub mod rng;

pub use attribution::{
    deeplift_rescale, explain_batch, integrated_gradients, lime_explain, Attribution, Candidate, Explainer, LimeConfig,
    Method, Reference, ReferencePlan,
};
pub use dataset::{FeatureTable, ScalerParams};
pub use error::{Error, Result};
pub use model::{Classifier, Differentiable, LinearModel, MlpModel, OutputTarget, Penalty, TrainConfig};
pub use reference::{ReferencePolicy, ReferenceSet};
