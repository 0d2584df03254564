//! Evaluation metrics for attributions: reference-sensitivity (entropy and
//! spread across references), agreement with global weights, and a
//! nearest-neighbour mutual information estimator.

mod experiment1;
mod experiment2;
mod mi;
mod trust;
mod uncertainty;

pub use experiment1::{run_experiment1, Exp1Input, Exp1Report, MiCrossCheck, RankedWeight};
pub use experiment2::{
    run_experiment2, AggregateCell, Exp2Config, Exp2Report, Exp2Setup, HistogramBin, ReferenceSummary,
};
pub use mi::{digamma, mutual_information};
pub use trust::{
    global_ranking_by_frequency, l2_distance, spearman, topk_concordance, weighted_spearman_distance,
    FeatureProportion, TrustRecord,
};
pub use uncertainty::{
    attribution_entropy, attribution_std, entropy_of, max_entropy, std_of, FeatureEntropy, UncertaintyRecord,
};
