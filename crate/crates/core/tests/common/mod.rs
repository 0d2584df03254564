#![allow(dead_code)]

use credattr::dataset::{prepare, split, synthesize, FeatureTable, GenerativeSpec, ScalerParams};
use credattr::model::{train_mlp, Activation, Dense, MlpModel, TrainConfig};
use credattr::rng::rng_from;
use rand::Rng;

pub struct Fixture {
    pub train: FeatureTable,
    pub validation: FeatureTable,
    pub scaler: ScalerParams,
    pub mlp: MlpModel,
}

pub fn trained(n_rows: usize, seed: u64) -> Fixture {
    let syn = synthesize(n_rows, &GenerativeSpec::fico_like(), seed).unwrap();
    let (_, scaled, scaler) = prepare(&syn.table).unwrap();
    let (train, validation) = split(&scaled, 0.33, seed).unwrap();
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mlp = train_mlp(&train, &cfg, &validation).unwrap();
    Fixture {
        train,
        validation,
        scaler,
        mlp,
    }
}

/// Randomly initialized network with non-zero biases, so kinks are not all
/// at the origin.
pub fn random_mlp(n_in: usize, hidden: &[usize], seed: u64) -> MlpModel {
    let mut rng = rng_from(seed);
    let mut sizes = vec![n_in];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let act = if l + 2 == sizes.len() {
                Activation::Sigmoid
            } else {
                Activation::Relu
            };
            let weights = (0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            Dense::new(w[0], w[1], weights, bias, act).unwrap()
        })
        .collect();
    MlpModel::new(layers).unwrap()
}

pub fn random_point(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}
