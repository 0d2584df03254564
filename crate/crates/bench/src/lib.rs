//! Fixtures shared by the benches: a network trained on the synthetic
//! surrogate, plus candidate and reference points from it.

use credattr::dataset::{prepare, split, synthesize, GenerativeSpec};
use credattr::model::{train_mlp, TrainConfig};
use credattr::reference::random_references;
use credattr::{FeatureTable, MlpModel, ScalerParams};

pub struct Fixture {
    pub train: FeatureTable,
    pub validation: FeatureTable,
    pub scaler: ScalerParams,
    pub mlp: MlpModel,
    /// Uniform random references, standardized.
    pub references: Vec<Vec<f64>>,
}

pub fn fixture(rows: usize, seed: u64) -> Fixture {
    let syn = synthesize(rows, &GenerativeSpec::fico_like().with_sentinel_rate(0.05), seed).expect("synthesize");
    let (_, scaled, scaler) = prepare(&syn.table).expect("prepare");
    let (train, validation) = split(&scaled, 0.33, seed).expect("split");
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mlp = train_mlp(&train, &cfg, &validation).expect("train");
    let references = random_references(&scaler, 20, seed).expect("references").references;
    Fixture {
        train,
        validation,
        scaler,
        mlp,
        references,
    }
}
