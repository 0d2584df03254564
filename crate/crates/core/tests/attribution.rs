mod common;

use credattr::attribution::{
    deeplift_rescale, explain_batch, integrated_gradients, integrated_gradients_uniform, lime_explain, Candidate,
    Explainer, LimeConfig, Reference, ReferencePlan,
};
use credattr::metrics::spearman;
use credattr::model::{Activation, Classifier, Dense, LinearModel, MlpModel, OutputTarget};
use credattr::rng::rng_from;
use rand::Rng;

fn pairs(n: usize, d: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| (common::random_point(d, &mut rng), common::random_point(d, &mut rng)))
        .collect()
}

fn delta(model: &MlpModel, x: &[f64], r: &[f64], target: OutputTarget) -> f64 {
    model.output(x, target).unwrap() - model.output(r, target).unwrap()
}

#[test]
fn ig_completeness_on_trained_network() {
    let fx = common::trained(3000, 11);
    for target in [OutputTarget::Probability, OutputTarget::Logit] {
        for (x, r) in pairs(100, 23, 1) {
            let a = integrated_gradients(&fx.mlp, &x, &r, 300, target).unwrap();
            let d = delta(&fx.mlp, &x, &r, target);
            let residual = a.total() - d;
            assert!((residual - a.completeness_residual.unwrap()).abs() < 1e-12);
            assert!(
                residual.abs() <= 0.01 * d.abs() + 1e-4,
                "residual {residual} for delta {d}"
            );
        }
    }
}

#[test]
fn aligned_ig_is_exact_on_the_logit_of_a_rectifier_network() {
    let net = common::random_mlp(10, &[12, 6], 14);
    for (x, r) in pairs(50, 10, 6) {
        let a = integrated_gradients(&net, &x, &r, 40, OutputTarget::Logit).unwrap();
        let d = delta(&net, &x, &r, OutputTarget::Logit);
        assert!((a.total() - d).abs() < 1e-9 * d.abs().max(1.0), "{} vs {d}", a.total());
    }
}

#[test]
fn aligned_ig_beats_uniform_cells_on_a_rectifier_network() {
    let net = common::random_mlp(10, &[12, 6], 14);
    let (mut aligned, mut uniform) = (0.0f64, 0.0f64);
    for (x, r) in pairs(50, 10, 7) {
        let a = integrated_gradients(&net, &x, &r, 100, OutputTarget::Probability).unwrap();
        let u = integrated_gradients_uniform(&net, &x, &r, 100, OutputTarget::Probability).unwrap();
        assert_eq!(u.steps_or_samples, 100);
        aligned = aligned.max(a.completeness_residual.unwrap().abs());
        uniform = uniform.max(u.completeness_residual.unwrap().abs());
    }
    assert!(aligned < uniform, "{aligned} vs {uniform}");
}

#[test]
fn deeplift_sums_to_delta() {
    let fx = common::trained(3000, 11);
    let nets = [fx.mlp, common::random_mlp(23, &[17, 5], 5)];
    for net in &nets {
        for target in [OutputTarget::Probability, OutputTarget::Logit] {
            for (x, r) in pairs(100, 23, 2) {
                let a = deeplift_rescale(net, &x, &r, target).unwrap();
                let d = delta(net, &x, &r, target);
                let rel = (a.total() - d).abs() / d.abs().max(1e-12);
                assert!(rel < 1e-6, "relative residual {rel}");
            }
        }
    }
}

#[test]
fn deeplift_of_identical_input_and_reference_is_zero() {
    let net = common::random_mlp(4, &[3], 8);
    let x = [0.3, -0.2, 1.0, 0.0];
    let a = deeplift_rescale(&net, &x, &x, OutputTarget::Probability).unwrap();
    assert!(a.values.iter().all(|v| *v == 0.0));
}

#[test]
fn ig_converges_with_step_count() {
    let fx = common::trained(3000, 11);
    for (x, r) in pairs(20, 23, 3) {
        let a = integrated_gradients(&fx.mlp, &x, &r, 300, OutputTarget::Probability).unwrap();
        let b = integrated_gradients(&fx.mlp, &x, &r, 600, OutputTarget::Probability).unwrap();
        let diff: f64 = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = b.values.iter().map(|q| q * q).sum::<f64>().sqrt();
        assert!(diff <= 0.005 * norm + 1e-12, "{diff} vs {norm}");
    }
}

#[test]
fn affine_logit_attributions_are_exact() {
    let mut rng = rng_from(12);
    for trial in 0..20 {
        let d = 8;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lr = LinearModel::from_parts(w.clone(), rng.random_range(-1.0..1.0));
        let net = MlpModel::from_linear(&lr);
        let x = common::random_point(d, &mut rng);
        let r = common::random_point(d, &mut rng);
        let expected: Vec<f64> = (0..d).map(|i| (x[i] - r[i]) * w[i]).collect();
        let ig = integrated_gradients(&lr, &x, &r, 1 + trial, OutputTarget::Logit).unwrap();
        let ig_net = integrated_gradients(&net, &x, &r, 7, OutputTarget::Logit).unwrap();
        let dl = deeplift_rescale(&net, &x, &r, OutputTarget::Logit).unwrap();
        for (i, e) in expected.iter().enumerate() {
            assert!((ig.values[i] - e).abs() <= 1e-9);
            assert!((ig_net.values[i] - e).abs() <= 1e-9);
            assert!((dl.values[i] - e).abs() <= 1e-9);
        }
    }
}

#[test]
fn identity_hidden_layers_remain_affine() {
    let l1 = Dense::new(
        3,
        2,
        vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.0],
        vec![0.1, -0.2],
        Activation::Identity,
    )
    .unwrap();
    let l2 = Dense::new(2, 1, vec![2.0, -3.0], vec![0.4], Activation::Sigmoid).unwrap();
    let net = MlpModel::new(vec![l1, l2]).unwrap();
    // effective weights: [2 - 1.5, 4 - 0, -2 - 3]
    let w = [0.5, 4.0, -5.0];
    let x = [0.2, -0.7, 1.1];
    let r = [-1.0, 0.3, 0.0];
    let ig = integrated_gradients(&net, &x, &r, 3, OutputTarget::Logit).unwrap();
    let dl = deeplift_rescale(&net, &x, &r, OutputTarget::Logit).unwrap();
    for i in 0..3 {
        let e = (x[i] - r[i]) * w[i];
        assert!((ig.values[i] - e).abs() <= 1e-9);
        assert!((dl.values[i] - e).abs() <= 1e-9);
    }
}

#[test]
fn logit_attributions_scale_with_output_layer() {
    let net = common::random_mlp(6, &[5], 31);
    let c = 3.5;
    let mut layers = net.layers().to_vec();
    let last = layers.last_mut().unwrap();
    last.weights.iter_mut().for_each(|w| *w *= c);
    last.bias.iter_mut().for_each(|b| *b *= c);
    let scaled = MlpModel::new(layers).unwrap();
    for (x, r) in pairs(20, 6, 4) {
        let a = integrated_gradients(&net, &x, &r, 50, OutputTarget::Logit).unwrap();
        let b = integrated_gradients(&scaled, &x, &r, 50, OutputTarget::Logit).unwrap();
        let p = deeplift_rescale(&net, &x, &r, OutputTarget::Logit).unwrap();
        let q = deeplift_rescale(&scaled, &x, &r, OutputTarget::Logit).unwrap();
        for i in 0..6 {
            assert!((b.values[i] - c * a.values[i]).abs() < 1e-12);
            assert!((q.values[i] - c * p.values[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn ig_is_antisymmetric_in_swapping_input_and_reference_on_linear_models() {
    let lr = LinearModel::from_parts(vec![1.0, -2.0, 0.5], 0.0);
    let x = [1.0, 2.0, 3.0];
    let r = [0.0, -1.0, 1.0];
    let a = integrated_gradients(&lr, &x, &r, 10, OutputTarget::Logit).unwrap();
    let b = integrated_gradients(&lr, &r, &x, 10, OutputTarget::Logit).unwrap();
    for i in 0..3 {
        assert!((a.values[i] + b.values[i]).abs() < 1e-12);
    }
}

#[test]
fn lime_recovers_linear_coefficient_ranking() {
    let mut rng = rng_from(40);
    for trial in 0..5 {
        let d = 10;
        let w: Vec<f64> = (0..d)
            .map(|i| (i as f64 + 1.0) * 0.2 * if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let lr = LinearModel::from_parts(w.clone(), 0.0);
        let x = vec![0.0; d];
        let cfg = LimeConfig {
            seed: trial,
            ..LimeConfig::default()
        };
        let a = lime_explain(|z| lr.output(z, OutputTarget::Logit), &x, &cfg).unwrap();
        let rho = spearman(
            &a.values.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            &w.iter().map(|v| v.abs()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(rho >= 0.95, "spearman {rho}");
        for (c, wi) in a.values.iter().zip(&w) {
            assert_eq!(c.signum(), wi.signum());
        }
    }
}

#[test]
fn lime_on_probability_output_keeps_ranking_near_the_boundary() {
    let w: Vec<f64> = (0..8).map(|i| 0.05 * (i as f64 + 1.0)).collect();
    let lr = LinearModel::from_parts(w.clone(), 0.0);
    let a = lime_explain(
        |z| lr.output(z, OutputTarget::Probability),
        &[0.0; 8],
        &LimeConfig::default(),
    )
    .unwrap();
    let rho = spearman(&a.values, &w).unwrap();
    assert!(rho >= 0.95, "spearman {rho}");
}

fn candidates(n: usize, d: usize, seed: u64) -> Vec<Candidate> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|i| Candidate {
            id: 100 + i,
            features: common::random_point(d, &mut rng),
        })
        .collect()
}

#[test]
fn batch_results_do_not_depend_on_thread_count() {
    let net = common::random_mlp(6, &[5, 3], 3);
    let cands = candidates(40, 6, 5);
    let plan = ReferencePlan::Shared(Reference {
        id: "zero".into(),
        values: vec![0.0; 6],
    });
    let explainers = [
        Explainer::IntegratedGradients { steps: 64 },
        Explainer::DeepLift,
        Explainer::Lime(LimeConfig {
            n_perturbations: 300,
            seed: 9,
            ..LimeConfig::default()
        }),
    ];
    for ex in &explainers {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| explain_batch(&net, &cands, ex, &plan, OutputTarget::Probability).unwrap())
        };
        let one = run(1);
        let many = run(4);
        assert_eq!(one, many);
        assert!(one.failures.is_empty());
        let ids: Vec<_> = one.attributions.iter().map(|a| a.candidate_id.unwrap()).collect();
        assert_eq!(ids, (100..140).collect::<Vec<_>>());
    }
}

#[test]
fn batch_attribution_of_a_candidate_does_not_depend_on_its_neighbours() {
    let net = common::random_mlp(6, &[5], 6);
    let cands = candidates(12, 6, 7);
    let ex = Explainer::Lime(LimeConfig {
        n_perturbations: 200,
        seed: 1,
        ..LimeConfig::default()
    });
    let full = explain_batch(&net, &cands, &ex, &ReferencePlan::None, OutputTarget::Logit).unwrap();
    let mut reversed = cands.clone();
    reversed.reverse();
    let back = explain_batch(&net, &reversed, &ex, &ReferencePlan::None, OutputTarget::Logit).unwrap();
    for (a, b) in full.attributions.iter().zip(back.attributions.iter().rev()) {
        assert_eq!(a, b);
    }
    let alone = explain_batch(&net, &cands[5..6], &ex, &ReferencePlan::None, OutputTarget::Logit).unwrap();
    assert_eq!(alone.attributions[0], full.attributions[5]);
}

#[test]
fn batch_records_failures_and_continues() {
    let net = common::random_mlp(3, &[2], 6);
    let mut cands = candidates(5, 3, 8);
    cands[2].features.push(0.0);
    let plan = ReferencePlan::Shared(Reference {
        id: "zero".into(),
        values: vec![0.0; 3],
    });
    let out = explain_batch(&net, &cands, &Explainer::DeepLift, &plan, OutputTarget::Logit).unwrap();
    assert_eq!(out.attributions.len(), 4);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].candidate_id, 102);
}

#[test]
fn reference_methods_require_a_reference() {
    let net = common::random_mlp(3, &[2], 6);
    let ex = Explainer::IntegratedGradients { steps: 10 };
    assert!(ex.explain(&net, 0, &[0.0; 3], None, OutputTarget::Logit).is_err());
}
