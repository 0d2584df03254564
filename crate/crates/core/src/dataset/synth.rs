//! Synthetic stand-in for the HELOC table with a planted linear logit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FeatureTable, FICO_FEATURES};
use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::rng::rng_from;

/// Marginal of one generated feature: a normal clamped to `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGen {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

/// Feature marginals plus the true logit
/// `intercept + sum_i coefficients[i] * (x_i - mean_i) / std_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub features: Vec<FeatureGen>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Probability that any cell is overwritten with a sentinel after the
    /// label is drawn.
    pub sentinel_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub table: FeatureTable,
    pub truth: GroundTruth,
}

// (mean, std, min, max, coefficient); ranges roughly follow the public
// HELOC marginals, signs follow the usual risk direction.
const FICO_LIKE: [(f64, f64, f64, f64, f64); 23] = [
    (72.0, 10.0, 33.0, 94.0, -1.0),
    (200.0, 97.0, 2.0, 803.0, -0.2),
    (9.6, 12.0, 0.0, 383.0, 0.05),
    (78.0, 33.0, 4.0, 383.0, -0.3),
    (21.0, 11.0, 0.0, 79.0, -0.25),
    (0.6, 1.2, 0.0, 19.0, 0.05),
    (0.4, 1.0, 0.0, 19.0, 0.0),
    (92.0, 11.0, 20.0, 100.0, -0.3),
    (21.0, 20.0, 0.0, 83.0, 0.0),
    (5.7, 1.6, 0.0, 9.0, -0.15),
    (6.4, 1.8, 2.0, 8.0, -0.05),
    (22.6, 13.0, 0.0, 104.0, 0.0),
    (1.9, 1.8, 0.0, 19.0, 0.05),
    (34.0, 17.0, 0.0, 100.0, 0.1),
    (2.5, 4.8, 0.0, 24.0, -0.3),
    (1.4, 2.1, 0.0, 66.0, 0.15),
    (1.3, 2.0, 0.0, 66.0, 0.0),
    (35.0, 29.0, 0.0, 232.0, 0.35),
    (68.0, 20.0, 0.0, 471.0, 0.1),
    (4.1, 3.0, 0.0, 32.0, 0.05),
    (2.5, 1.6, 1.0, 23.0, 0.1),
    (1.1, 1.5, 0.0, 18.0, 0.15),
    (67.0, 22.0, 0.0, 100.0, 0.1),
];

impl GenerativeSpec {
    /// HELOC-shaped marginals and a planted logit whose strongest driver
    /// is `ExternalRiskEstimate`.
    pub fn fico_like() -> Self {
        let features = FICO_FEATURES
            .iter()
            .zip(FICO_LIKE)
            .map(|((name, _), (mean, std, min, max, _))| FeatureGen {
                name: name.to_string(),
                mean,
                std,
                min,
                max,
                integer: true,
            })
            .collect();
        Self {
            features,
            coefficients: FICO_LIKE.iter().map(|c| c.4).collect(),
            intercept: 0.0,
            sentinel_rate: 0.0,
        }
    }

    pub fn with_coefficients(mut self, coefficients: Vec<f64>) -> Self {
        self.coefficients = coefficients;
        self
    }

    pub fn with_sentinel_rate(mut self, rate: f64) -> Self {
        self.sentinel_rate = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.features.is_empty() || self.features.len() != self.coefficients.len() {
            return Err(Error::Argument(format!(
                "{} features but {} coefficients",
                self.features.len(),
                self.coefficients.len()
            )));
        }
        for f in &self.features {
            if !(f.std > 0.0) || f.min > f.max {
                return Err(Error::Argument(format!("invalid marginal for `{}`", f.name)));
            }
        }
        if !(0.0..1.0).contains(&self.sentinel_rate) {
            return Err(Error::Argument("sentinel rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Draws `n_rows` rows and Bernoulli labels from the planted logit.
pub fn synthesize(n_rows: usize, spec: &GenerativeSpec, seed: u64) -> Result<Synthetic> {
    if n_rows < 10 {
        return Err(Error::Argument(format!("need at least 10 rows, got {n_rows}")));
    }
    spec.validate()?;
    let mut rng = rng_from(seed);
    let d = spec.features.len();
    let mut values = Vec::with_capacity(n_rows * d);
    let mut target = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut logit = spec.intercept;
        for (f, &c) in spec.features.iter().zip(&spec.coefficients) {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut v = (f.mean + f.std * z).clamp(f.min, f.max);
            if f.integer {
                v = v.round();
            }
            logit += c * (v - f.mean) / f.std;
            values.push(v);
        }
        let p = sigmoid(logit);
        target.push(u8::from(rng.random::<f64>() < p));
    }
    if spec.sentinel_rate > 0.0 {
        for v in values.iter_mut() {
            if rng.random::<f64>() < spec.sentinel_rate {
                *v = [-7.0, -8.0, -9.0][rng.random_range(0..3)];
            }
        }
    }
    let names = spec.features.iter().map(|f| f.name.clone()).collect();
    Ok(Synthetic {
        table: FeatureTable::new(names, values, target)?,
        truth: GroundTruth {
            coefficients: spec.coefficients.clone(),
            intercept: spec.intercept,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_give_balanced_labels() {
        let spec = GenerativeSpec::fico_like().with_coefficients(vec![0.0; 23]);
        let s = synthesize(4000, &spec, 3).unwrap();
        assert!((s.table.positive_rate() - 0.5).abs() < 0.03);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GenerativeSpec::fico_like();
        let a = synthesize(200, &spec, 11).unwrap();
        let b = synthesize(200, &spec, 11).unwrap();
        let c = synthesize(200, &spec, 12).unwrap();
        assert_eq!(a.table, b.table);
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn rejects_tiny_tables() {
        assert!(matches!(
            synthesize(9, &GenerativeSpec::fico_like(), 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn values_respect_marginal_bounds() {
        let spec = GenerativeSpec::fico_like();
        let s = synthesize(2000, &spec, 5).unwrap();
        for (j, f) in spec.features.iter().enumerate() {
            for v in s.table.column(j) {
                assert!(v >= f.min && v <= f.max, "{} = {v}", f.name);
            }
        }
    }
}
