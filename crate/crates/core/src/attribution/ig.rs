use super::{completeness_residual, Attribution, Method};
use crate::error::{check_dim, Error, Result};
use crate::model::{Differentiable, OutputTarget};

pub const DEFAULT_IG_STEPS: usize = 100;
pub const MAX_IG_STEPS: usize = 600;

/// Integrated Gradients along the straight path from `reference` to `x`.
///
/// The path integral is taken by the composite midpoint rule over `steps`
/// cells. Cell edges are aligned with the model's
/// [`path_breakpoints`](Differentiable::path_breakpoints), so a rectifier
/// network is integrated piece by piece; each piece gets at least one cell
/// and the rest are shared out by length.
pub fn integrated_gradients<M: Differentiable + ?Sized>(
    model: &M,
    x: &[f64],
    reference: &[f64],
    steps: usize,
    target: OutputTarget,
) -> Result<Attribution> {
    check_args(model, x, reference, steps)?;
    let mut edges = vec![0.0];
    edges.extend(model.path_breakpoints(x, reference)?);
    edges.push(1.0);
    path_integral(model, x, reference, &edges, steps, target)
}

/// Integrated Gradients with `steps` equal midpoint cells, ignoring any
/// breakpoints.
pub fn integrated_gradients_uniform<M: Differentiable + ?Sized>(
    model: &M,
    x: &[f64],
    reference: &[f64],
    steps: usize,
    target: OutputTarget,
) -> Result<Attribution> {
    check_args(model, x, reference, steps)?;
    path_integral(model, x, reference, &[0.0, 1.0], steps, target)
}

fn check_args<M: Differentiable + ?Sized>(model: &M, x: &[f64], reference: &[f64], steps: usize) -> Result<()> {
    check_dim(model.n_features(), x.len())?;
    check_dim(x.len(), reference.len())?;
    if steps == 0 || steps > MAX_IG_STEPS {
        return Err(Error::Argument(format!(
            "IG steps must lie in 1..={MAX_IG_STEPS}, got {steps}"
        )));
    }
    Ok(())
}

/// Cells per segment: one each, the remainder by largest share of length.
fn allocate_cells(edges: &[f64], steps: usize) -> Vec<usize> {
    let n_seg = edges.len() - 1;
    let mut cells = vec![1usize; n_seg];
    let spare = steps.saturating_sub(n_seg);
    if spare == 0 {
        return cells;
    }
    let shares: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]) * spare as f64).collect();
    let mut given = 0;
    for (c, s) in cells.iter_mut().zip(&shares) {
        let whole = s.floor() as usize;
        *c += whole;
        given += whole;
    }
    let mut order: Vec<usize> = (0..n_seg).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(spare - given) {
        cells[i] += 1;
    }
    cells
}

fn path_integral<M: Differentiable + ?Sized>(
    model: &M,
    x: &[f64],
    reference: &[f64],
    edges: &[f64],
    steps: usize,
    target: OutputTarget,
) -> Result<Attribution> {
    let delta: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
    let cells = allocate_cells(edges, steps);
    let mut avg_grad = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for (w, &n) in edges.windows(2).zip(&cells) {
        let h = (w[1] - w[0]) / n as f64;
        for k in 0..n {
            let alpha = w[0] + (k as f64 + 0.5) * h;
            for ((p, r), d) in point.iter_mut().zip(reference).zip(&delta) {
                *p = r + alpha * d;
            }
            let g = model.input_gradient(&point, target)?;
            for (a, gi) in avg_grad.iter_mut().zip(&g) {
                *a += h * gi;
            }
        }
    }
    let values: Vec<f64> = avg_grad.iter().zip(&delta).map(|(g, d)| g * d).collect();
    let residual = completeness_residual(model, x, reference, &values, target)?;
    Ok(Attribution {
        values,
        method: Method::IntegratedGradients,
        target,
        candidate_id: None,
        candidate: x.to_vec(),
        reference_id: None,
        reference: Some(reference.to_vec()),
        steps_or_samples: cells.iter().sum(),
        completeness_residual: Some(residual),
    })
}
