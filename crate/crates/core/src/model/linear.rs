//! L1/L2-regularized logistic regression fit by accelerated (proximal)
//! gradient descent, with a validation grid search over penalties.

use serde::{Deserialize, Serialize};

use super::{accuracy, bce_with_logit, sigmoid, Classifier, Differentiable, MODEL_FORMAT_VERSION};
use crate::dataset::FeatureTable;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        })
    }
}

/// One grid point and the validation accuracy it reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub penalty: Penalty,
    pub strength: f64,
    pub validation_accuracy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format_version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
    pub strength: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub grid: Vec<GridPoint>,
}

impl LinearModel {
    /// Unfitted model with the given coefficients.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            weights,
            bias,
            penalty: Penalty::L2,
            strength: 0.0,
            train_accuracy: f64::NAN,
            validation_accuracy: f64::NAN,
            grid: Vec::new(),
        }
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn logit(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x.len())?;
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }
}

impl Differentiable for LinearModel {
    fn logit_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.logit(x)?, self.weights.clone()))
    }
}

/// Regularization strengths {0.01, 0.1, 1, 10, 100} under both penalties.
pub fn default_grid() -> Vec<(Penalty, f64)> {
    let mut grid = Vec::new();
    for penalty in [Penalty::L1, Penalty::L2] {
        for s in [0.01, 0.1, 1.0, 10.0, 100.0] {
            grid.push((penalty, s));
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the (proximal) gradient norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200_000,
        }
    }
}

/// Fits every grid point on `train` and keeps the one with the best
/// validation accuracy. Ties go to the stronger regularization.
pub fn train_logistic(train: &FeatureTable, grid: &[(Penalty, f64)], validation: &FeatureTable) -> Result<LinearModel> {
    train_logistic_with(train, grid, validation, SolverOptions::default())
}

pub fn train_logistic_with(
    train: &FeatureTable,
    grid: &[(Penalty, f64)],
    validation: &FeatureTable,
    opts: SolverOptions,
) -> Result<LinearModel> {
    if grid.is_empty() {
        return Err(Error::Argument("regularization grid is empty".into()));
    }
    if let Some((_, s)) = grid.iter().find(|(_, s)| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Argument(format!("invalid regularization strength {s}")));
    }
    check_dim(train.n_features(), validation.n_features())?;
    if train.n_rows() == 0 || validation.n_rows() == 0 {
        return Err(Error::Argument("train and validation tables must be non-empty".into()));
    }

    let problem = Problem::new(train);
    // Strongest first so ties resolve toward it, and so each fit warm-starts
    // from a nearby, more regular solution.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].1.total_cmp(&grid[a].1).then(a.cmp(&b)));

    let mut best: Option<LinearModel> = None;
    let mut points = Vec::with_capacity(grid.len());
    let mut warm: [Option<Vec<f64>>; 2] = [None, None];
    for &gi in &order {
        let (penalty, strength) = grid[gi];
        let slot = usize::from(penalty == Penalty::L2);
        let start = warm[slot].clone().unwrap_or_else(|| vec![0.0; problem.d + 1]);
        let (theta, iterations) = problem.fit(penalty, strength, start, opts)?;
        warm[slot] = Some(theta.clone());
        let mut model = LinearModel::from_parts(theta[..problem.d].to_vec(), theta[problem.d]);
        model.penalty = penalty;
        model.strength = strength;
        model.validation_accuracy = accuracy(&model, validation)?;
        points.push(GridPoint {
            penalty,
            strength,
            validation_accuracy: model.validation_accuracy,
            iterations,
        });
        if best
            .as_ref()
            .is_none_or(|b| model.validation_accuracy > b.validation_accuracy)
        {
            best = Some(model);
        }
    }
    let mut best = best.expect("grid is non-empty");
    best.train_accuracy = accuracy(&best, train)?;
    best.grid = points;
    Ok(best)
}

/// Regularized mean negative log-likelihood over a standardized table.
/// Parameters are `[w_0 .. w_{d-1}, b]`; the bias is never penalized.
struct Problem<'a> {
    x: &'a [f64],
    y: Vec<f64>,
    n: usize,
    d: usize,
}

impl<'a> Problem<'a> {
    fn new(table: &'a FeatureTable) -> Self {
        Self {
            x: table.values(),
            y: table.target().iter().map(|&t| t as f64).collect(),
            n: table.n_rows(),
            d: table.n_features(),
        }
    }

    /// Gradient of the smooth part (mean NLL, plus the ridge term for L2).
    fn gradient(&self, theta: &[f64], penalty: Penalty, lambda: f64, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = self.d;
        let mut loss = 0.0;
        for (row, &y) in self.x.chunks_exact(d).zip(&self.y) {
            let z = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
            loss += bce_with_logit(z, y);
            let r = sigmoid(z) - y;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
            grad[d] += r;
        }
        let inv_n = 1.0 / self.n as f64;
        grad.iter_mut().for_each(|g| *g *= inv_n);
        loss *= inv_n;
        let scaled = lambda * inv_n;
        match penalty {
            Penalty::L2 => {
                for (g, w) in grad[..d].iter_mut().zip(theta) {
                    *g += scaled * w;
                }
                loss + 0.5 * scaled * theta[..d].iter().map(|w| w * w).sum::<f64>()
            }
            Penalty::L1 => loss,
        }
    }

    /// Upper bound on the Lipschitz constant of the smooth gradient:
    /// `0.25 * lambda_max([X 1]^T [X 1] / n)`, by power iteration.
    fn lipschitz(&self) -> f64 {
        let d = self.d;
        let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
        let mut est = 1.0;
        for _ in 0..100 {
            let mut out = vec![0.0; d + 1];
            for row in self.x.chunks_exact(d) {
                let s = row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[d];
                for (o, a) in out.iter_mut().zip(row) {
                    *o += s * a;
                }
                out[d] += s;
            }
            let norm = out.iter().map(|o| o * o).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let next = norm / self.n as f64;
            v = out.iter().map(|o| o / norm).collect();
            if (next - est).abs() <= 1e-8 * next {
                est = next;
                break;
            }
            est = next;
        }
        // Power iteration approaches from below; pad it.
        0.25 * est * 1.05
    }

    fn prox(&self, theta: &mut [f64], penalty: Penalty, threshold: f64) {
        if penalty == Penalty::L1 {
            for w in theta[..self.d].iter_mut() {
                *w = w.signum() * (w.abs() - threshold).max(0.0);
            }
        }
    }

    /// FISTA with adaptive restart. Returns the parameters and iteration
    /// count once the gradient mapping norm drops below tolerance.
    fn fit(&self, penalty: Penalty, strength: f64, start: Vec<f64>, opts: SolverOptions) -> Result<(Vec<f64>, usize)> {
        let p = self.d + 1;
        let lambda = strength;
        let ridge = if penalty == Penalty::L2 {
            lambda / self.n as f64
        } else {
            0.0
        };
        let lip = self.lipschitz() + ridge;
        let step = 1.0 / lip;
        let l1_threshold = step * lambda / self.n as f64;

        let mut x = start;
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut grad = vec![0.0; p];
        let mut next = vec![0.0; p];
        let mut gnorm = f64::INFINITY;
        for it in 1..=opts.max_iterations {
            self.gradient(&y, penalty, lambda, &mut grad);
            for k in 0..p {
                next[k] = y[k] - step * grad[k];
            }
            self.prox(&mut next, penalty, l1_threshold);
            let mapping = (0..p).map(|k| (y[k] - next[k]).powi(2)).sum::<f64>().sqrt() * lip;
            if mapping < opts.tolerance {
                gnorm = self.mapping_norm(&next, penalty, lambda, step, &mut grad);
                if gnorm < opts.tolerance {
                    return Ok((next, it));
                }
            }
            // Restart momentum when it points uphill.
            let uphill: f64 = (0..p).map(|k| (y[k] - next[k]) * (next[k] - x[k])).sum();
            let t_next = if uphill > 0.0 {
                1.0
            } else {
                0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
            };
            let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            for k in 0..p {
                y[k] = next[k] + beta * (next[k] - x[k]);
            }
            std::mem::swap(&mut x, &mut next);
            t = t_next;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical("logistic solver produced non-finite weights".into()));
            }
        }
        if gnorm.is_infinite() {
            gnorm = self.mapping_norm(&x, penalty, lambda, step, &mut grad);
        }
        Err(Error::Convergence {
            iterations: opts.max_iterations,
            grad_norm: gnorm,
        })
    }

    /// Norm of the (proximal) gradient mapping at `theta`; equals the plain
    /// gradient norm for L2.
    fn mapping_norm(&self, theta: &[f64], penalty: Penalty, lambda: f64, step: f64, grad: &mut [f64]) -> f64 {
        self.gradient(theta, penalty, lambda, grad);
        match penalty {
            Penalty::L2 => grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            Penalty::L1 => {
                let mut moved: Vec<f64> = theta.iter().zip(grad.iter()).map(|(t, g)| t - step * g).collect();
                self.prox(&mut moved, penalty, step * lambda / self.n as f64);
                theta
                    .iter()
                    .zip(&moved)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / step
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> FeatureTable {
        let mut rows = Vec::new();
        let mut target = Vec::new();
        for i in 0..40 {
            let a = (i as f64 * 0.37).sin() * 2.0;
            let b = (i as f64 * 0.91).cos() * 2.0;
            // label by the direction (1, -1), with a margin
            let s = a - b;
            if s.abs() < 0.3 {
                continue;
            }
            rows.push(vec![a, b]);
            target.push(u8::from(s > 0.0));
        }
        FeatureTable::from_rows(vec!["a".into(), "b".into()], &rows, target).unwrap()
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let t = separable();
        let m = train_logistic(&t, &default_grid(), &t).unwrap();
        assert_eq!(accuracy(&m, &t).unwrap(), 1.0);
        assert!(m.weights[0] > 0.0 && m.weights[1] < 0.0, "{:?}", m.weights);
        assert_eq!(m.grid.len(), 10);
    }

    #[test]
    fn l2_solution_has_zero_gradient() {
        let t = separable();
        let problem = Problem::new(&t);
        let (theta, _) = problem
            .fit(Penalty::L2, 1.0, vec![0.0; 3], SolverOptions::default())
            .unwrap();
        let mut g = vec![0.0; 3];
        problem.gradient(&theta, Penalty::L2, 1.0, &mut g);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
    }

    #[test]
    fn strong_l1_zeroes_weights() {
        let t = separable();
        let problem = Problem::new(&t);
        let (theta, _) = problem
            .fit(Penalty::L1, 1e4, vec![0.0; 3], SolverOptions::default())
            .unwrap();
        assert_eq!(&theta[..2], &[0.0, 0.0]);
    }

    #[test]
    fn iteration_cap_reports_gradient_norm() {
        let t = separable();
        let opts = SolverOptions {
            tolerance: 1e-12,
            max_iterations: 3,
        };
        match train_logistic_with(&t, &[(Penalty::L2, 0.01)], &t, opts) {
            Err(Error::Convergence { grad_norm, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(grad_norm.is_finite() && grad_norm > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let t = separable();
        assert!(matches!(train_logistic(&t, &[], &t), Err(Error::Argument(_))));
    }

    #[test]
    fn logit_is_affine() {
        let mut w = vec![0.0; 23];
        w[0] = 1.0;
        let m = LinearModel::from_parts(w, 0.0);
        let mut e1 = vec![0.0; 23];
        e1[0] = 1.0;
        assert_eq!(m.logit(&e1).unwrap(), 1.0);
        assert!(matches!(m.logit(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
