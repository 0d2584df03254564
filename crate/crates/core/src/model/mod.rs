//! Credit-risk classifiers: a regularized logistic regression and a small
//! rectifier network. Both score `p_bad = sigmoid(logit(x))`.

mod linear;
mod mlp;

pub use linear::{default_grid, train_logistic, GridPoint, LinearModel, Penalty, SolverOptions};
pub use mlp::{train_mlp, Activation, Dense, ForwardTrace, MlpModel, TrainConfig, TrainingMeta};

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::error::{Error, Result};

/// Format version written into persisted model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the sigmoid at `z`.
pub fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// Binary cross-entropy of a logit against a 0/1 label.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Which scalar output an attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputTarget {
    #[default]
    Probability,
    Logit,
}

/// A binary classifier over standardized feature vectors.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    fn logit(&self, x: &[f64]) -> Result<f64>;

    /// `[p_good, p_bad]`.
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        let p = sigmoid(self.logit(x)?);
        Ok([1.0 - p, p])
    }

    fn p_bad(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    fn output(&self, x: &[f64], target: OutputTarget) -> Result<f64> {
        let z = self.logit(x)?;
        Ok(match target {
            OutputTarget::Logit => z,
            OutputTarget::Probability => sigmoid(z),
        })
    }
}

/// Classifiers with exact input gradients.
pub trait Differentiable: Classifier {
    /// The logit and its gradient with respect to `x`.
    fn logit_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn input_gradient(&self, x: &[f64], target: OutputTarget) -> Result<Vec<f64>> {
        let (z, mut g) = self.logit_gradient(x)?;
        if target == OutputTarget::Probability {
            let s = sigmoid_prime(z);
            g.iter_mut().for_each(|v| *v *= s);
        }
        Ok(g)
    }

    /// Fractions `t` in (0, 1), increasing, at which the gradient may jump
    /// along `reference + t (x - reference)`. Smooth models have none.
    fn path_breakpoints(&self, _x: &[f64], _reference: &[f64]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

/// Counts at threshold 0.5 on `p_bad` (ties predict the positive class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }
}

pub fn confusion<M: Classifier + ?Sized>(model: &M, table: &FeatureTable) -> Result<Confusion> {
    if table.n_rows() == 0 {
        return Err(Error::Argument("cannot score an empty table".into()));
    }
    let mut c = Confusion::default();
    for (x, &y) in table.rows().zip(table.target()) {
        let predicted_bad = model.p_bad(x)? >= 0.5;
        match (predicted_bad, y == 1) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// Fraction of rows classified correctly at threshold 0.5.
pub fn accuracy<M: Classifier + ?Sized>(model: &M, table: &FeatureTable) -> Result<f64> {
    Ok(confusion(model, table)?.accuracy())
}

/// Mean binary cross-entropy over a table.
pub fn mean_log_loss<M: Classifier + ?Sized>(model: &M, table: &FeatureTable) -> Result<f64> {
    let mut acc = 0.0;
    for (x, &y) in table.rows().zip(table.target()) {
        acc += bce_with_logit(model.logit(x)?, y as f64);
    }
    Ok(acc / table.n_rows().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        for z in [-800.0, -30.0, -1.5, 0.3, 12.0, 800.0] {
            let s = sigmoid(z);
            assert!(s.is_finite());
            assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bce_matches_naive_form() {
        for (z, y) in [(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-1.0, 1.0)] {
            let p = sigmoid(z);
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - naive).abs() < 1e-12);
        }
    }
}
