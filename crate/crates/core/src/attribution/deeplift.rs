use super::{completeness_residual, Attribution, Method};
use crate::error::{check_dim, Result};
use crate::model::{Activation, MlpModel, OutputTarget};

/// Below this input difference a nonlinearity's multiplier is replaced by
/// its derivative at the reference activation.
const RESCALE_EPS: f64 = 1e-9;

fn rescale(act: Activation, z: f64, z_ref: f64) -> f64 {
    let dz = z - z_ref;
    if dz.abs() < RESCALE_EPS {
        act.derivative(z_ref)
    } else {
        (act.apply(z) - act.apply(z_ref)) / dz
    }
}

/// Input multipliers `m_i` with `sum_i m_i (x_i - r_i) = F(x) - F(r)`,
/// chained from the output down: linear rule through affine maps,
/// rescale rule through every activation.
pub fn deeplift_multipliers(model: &MlpModel, x: &[f64], reference: &[f64], target: OutputTarget) -> Result<Vec<f64>> {
    check_dim(x.len(), reference.len())?;
    let t = model.forward(x)?;
    let t0 = model.forward(reference)?;
    let layers = model.layers();
    let last = layers.len() - 1;

    let top = match target {
        OutputTarget::Logit => 1.0,
        OutputTarget::Probability => rescale(layers[last].activation, t.pre[last][0], t0.pre[last][0]),
    };
    let mut m = layers[last].backward(&[top]);
    for l in (0..last).rev() {
        let act = layers[l].activation;
        for ((mi, &z), &z0) in m.iter_mut().zip(&t.pre[l]).zip(&t0.pre[l]) {
            *mi *= rescale(act, z, z0);
        }
        m = layers[l].backward(&m);
    }
    Ok(m)
}

/// DeepLIFT contribution scores of each input relative to `reference`.
pub fn deeplift_rescale(model: &MlpModel, x: &[f64], reference: &[f64], target: OutputTarget) -> Result<Attribution> {
    let m = deeplift_multipliers(model, x, reference, target)?;
    let values: Vec<f64> = m
        .iter()
        .zip(x.iter().zip(reference))
        .map(|(mi, (a, b))| mi * (a - b))
        .collect();
    let residual = completeness_residual(model, x, reference, &values, target)?;
    Ok(Attribution {
        values,
        method: Method::DeepLift,
        target,
        candidate_id: None,
        candidate: x.to_vec(),
        reference_id: None,
        reference: Some(reference.to_vec()),
        steps_or_samples: 1,
        completeness_residual: Some(residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Classifier, Dense};

    fn tiny() -> MlpModel {
        let h = Dense::new(2, 2, vec![1.0, -1.0, 0.5, 2.0], vec![0.0, -0.5], Activation::Relu).unwrap();
        let o = Dense::new(2, 1, vec![1.5, -0.7], vec![0.2], Activation::Sigmoid).unwrap();
        MlpModel::new(vec![h, o]).unwrap()
    }

    #[test]
    fn hand_computed_two_unit_net() {
        // x = (2, 1): pre = (1, 2.5); r = (0, 0): pre = (0, -0.5)
        // hidden deltas: relu(1)-relu(0) = 1 over dz 1 -> 1;
        //                relu(2.5)-relu(-0.5) = 2.5 over dz 3 -> 5/6
        // logit multipliers: W1^T (1.5*1, -0.7*5/6)
        let m = tiny();
        let a = deeplift_rescale(&m, &[2.0, 1.0], &[0.0, 0.0], OutputTarget::Logit).unwrap();
        let h = [1.5, -0.7 * 5.0 / 6.0];
        let mult = [h[0] * 1.0 + h[1] * 0.5, -h[0] + h[1] * 2.0];
        assert!((a.values[0] - 2.0 * mult[0]).abs() < 1e-12);
        assert!((a.values[1] - 1.0 * mult[1]).abs() < 1e-12);
        let delta = m.logit(&[2.0, 1.0]).unwrap() - m.logit(&[0.0, 0.0]).unwrap();
        assert!((a.total() - delta).abs() < 1e-12);
    }

    #[test]
    fn reference_equal_to_input_gives_zero() {
        let m = tiny();
        let a = deeplift_rescale(&m, &[0.3, 0.2], &[0.3, 0.2], OutputTarget::Probability).unwrap();
        assert_eq!(a.values, vec![0.0, 0.0]);
        assert_eq!(a.completeness_residual, Some(0.0));
    }

    #[test]
    fn tiny_hidden_delta_uses_reference_derivative() {
        let m = tiny();
        let x = [2.0, 1.0];
        let r = [2.0 + 1e-12, 1.0];
        let a = deeplift_rescale(&m, &x, &r, OutputTarget::Probability).unwrap();
        assert!(a.values.iter().all(|v| v.is_finite()));
    }
}
