use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{rank_by_magnitude, Attribution, Method};
use crate::error::{Error, Result};
use crate::model::OutputTarget;
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    /// Exponential kernel width; `None` means `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    /// Standard deviation of the Gaussian perturbation, per standardized
    /// feature.
    pub perturbation_scale: f64,
    pub ridge_strength: f64,
    /// Keep only this many largest-magnitude coefficients; `None` keeps all.
    pub top_k: Option<usize>,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_perturbations: 5000,
            kernel_width: None,
            perturbation_scale: 1.0,
            ridge_strength: 1.0,
            top_k: None,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.n_perturbations < 100 {
            return Err(Error::Argument(format!(
                "LIME needs at least 100 perturbations, got {}",
                self.n_perturbations
            )));
        }
        let kw = self.kernel_width_for(d);
        if !(kw > 0.0) || !(self.perturbation_scale > 0.0) || !(self.ridge_strength > 0.0) {
            return Err(Error::Argument(
                "kernel width, perturbation scale and ridge strength must be positive".into(),
            ));
        }
        if self.top_k == Some(0) {
            return Err(Error::Argument("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fits a proximity-weighted ridge surrogate to `predict` around `x` and
/// returns its coefficients.
///
/// Samples are `x + scale * N(0, I)`, weighted by
/// `exp(-|z - x|^2 / width^2)`. The intercept is fit but not penalized.
pub fn lime_explain<F>(predict: F, x: &[f64], cfg: &LimeConfig) -> Result<Attribution>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let d = x.len();
    if d == 0 {
        return Err(Error::Argument("cannot explain an empty input".into()));
    }
    cfg.validate(d)?;
    let n = cfg.n_perturbations;
    let width2 = cfg.kernel_width_for(d).powi(2);
    let mut rng = rng_from(cfg.seed);

    let mut samples = Vec::with_capacity(n * d);
    let mut outputs = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        let mut dist2 = 0.0;
        for (zi, xi) in z.iter_mut().zip(x) {
            let e: f64 = StandardNormal.sample(&mut rng);
            let step = cfg.perturbation_scale * e;
            *zi = xi + step;
            dist2 += step * step;
        }
        let y = predict(&z)?;
        if !y.is_finite() {
            return Err(Error::Numerical(
                "prediction function returned a non-finite value".into(),
            ));
        }
        samples.extend_from_slice(&z);
        outputs.push(y);
        weights.push((-dist2 / width2).exp());
    }

    let w_sum: f64 = weights.iter().sum();
    if !(w_sum > 0.0) {
        return Err(Error::Numerical(
            "all perturbation weights vanished; widen the kernel".into(),
        ));
    }
    let mut z_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for ((row, &y), &w) in samples.chunks_exact(d).zip(&outputs).zip(&weights) {
        for (m, v) in z_mean.iter_mut().zip(row) {
            *m += w * v;
        }
        y_mean += w * y;
    }
    z_mean.iter_mut().for_each(|m| *m /= w_sum);
    y_mean /= w_sum;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centered = vec![0.0; d];
    for ((row, &y), &w) in samples.chunks_exact(d).zip(&outputs).zip(&weights) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&z_mean) {
            *c = v - m;
        }
        let dy = y - y_mean;
        for a in 0..d {
            let wa = w * centered[a];
            rhs[a] += wa * dy;
            for b in a..d {
                gram[(a, b)] += wa * centered[b];
            }
        }
    }
    let spread: f64 = (0..d).map(|a| gram[(a, a)]).sum();
    if !(spread > 0.0) {
        return Err(Error::Numerical(
            "perturbations are all identical; design matrix is degenerate".into(),
        ));
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += cfg.ridge_strength;
    }
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge system is not positive definite".into()))?
        .solve(&rhs);

    let mut values: Vec<f64> = coef.iter().copied().collect();
    if let Some(k) = cfg.top_k {
        for &i in rank_by_magnitude(&values).iter().skip(k) {
            values[i] = 0.0;
        }
    }
    Ok(Attribution {
        values,
        method: Method::Lime,
        target: OutputTarget::Probability,
        candidate_id: None,
        candidate: x.to_vec(),
        reference_id: None,
        reference: None,
        steps_or_samples: n,
        completeness_residual: None,
    })
}
