use credattr::attribution::{Attribution, Method};
use credattr::metrics::{
    entropy_of, global_ranking_by_frequency, l2_distance, max_entropy, mutual_information, run_experiment1, std_of,
    topk_concordance, weighted_spearman_distance, Exp1Input,
};
use credattr::model::OutputTarget;
use credattr::rng::rng_from;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn normal_pdf(x: f64, mu: f64) -> f64 {
    (-(x - mu).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// I(X;Y) for X | Y=y ~ N(+-1, 1), balanced Y, by composite Simpson.
fn mixture_mi_quadrature() -> f64 {
    let (a, b, n) = (-14.0, 14.0, 20_000);
    let h = (b - a) / n as f64;
    let f = |x: f64| {
        let (p, q) = (normal_pdf(x, 1.0), normal_pdf(x, -1.0));
        let m = 0.5 * (p + q);
        let term = |d: f64| if d > 0.0 { 0.5 * d * (d / m).ln() } else { 0.0 };
        term(p) + term(q)
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn mixture_sample(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = rng_from(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let x = y
        .iter()
        .map(|&t| unit.sample(&mut rng) + if t == 1 { 1.0 } else { -1.0 })
        .collect();
    (x, y)
}

#[test]
fn quadrature_oracle_is_sane() {
    let mi = mixture_mi_quadrature();
    assert!(mi > 0.0 && mi < 2f64.ln());
}

#[test]
fn mi_matches_quadrature_on_gaussian_mixture() {
    let truth = mixture_mi_quadrature();
    for seed in 0..3 {
        let (x, y) = mixture_sample(10_000, seed);
        let est = mutual_information(&x, &y, 3).unwrap();
        assert!((est - truth).abs() < 0.02, "estimate {est} vs {truth}");
    }
}

#[test]
fn mi_of_independent_feature_is_near_zero() {
    let unit = Normal::new(0.0, 1.0).unwrap();
    for seed in 0..10 {
        let mut rng = rng_from(seed);
        let x: Vec<f64> = (0..10_000).map(|_| unit.sample(&mut rng)).collect();
        let y: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random::<bool>())).collect();
        let est = mutual_information(&x, &y, 3).unwrap();
        assert!((0.0..0.01).contains(&est), "seed {seed}: {est}");
    }
}

#[test]
fn mi_of_the_target_itself_is_its_entropy() {
    let y: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
    let x: Vec<f64> = y.iter().map(|&t| t as f64).collect();
    let est = mutual_information(&x, &y, 3).unwrap();
    assert!((est - 2f64.ln()).abs() < 0.05, "{est}");
}

#[test]
fn mi_is_invariant_under_monotone_transform() {
    let (x, y) = mixture_sample(10_000, 5);
    let a = mutual_information(&x, &y, 3).unwrap();
    let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let b = mutual_information(&ex, &y, 3).unwrap();
    assert!((a - b).abs() < 0.01, "{a} vs {b}");
}

fn rows_of(k: usize, d: usize, values: &[f64]) -> Vec<Vec<f64>> {
    values.chunks(d).take(k).map(|c| c.to_vec()).collect()
}

#[test]
fn uniform_attributions_reach_the_entropy_maximum() {
    for k in 2..=30 {
        let rows = vec![vec![0.7, -2.0, 1e-3]; k];
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let e = entropy_of(&refs).unwrap();
        for h in e.entropy {
            assert!((h - max_entropy(k)).abs() < 1e-15, "k = {k}: {h}");
        }
    }
}

#[test]
fn single_spike_has_zero_entropy() {
    let mut rows = vec![vec![0.0; 4]; 20];
    rows[7] = vec![1.0, -3.0, 0.5, 2.0];
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let e = entropy_of(&refs).unwrap();
    assert!(e.entropy.iter().all(|&h| h == 0.0));
    assert!(e.zero_features.is_empty());
}

#[test]
fn worked_three_reference_example() {
    let rows = [vec![1.0], vec![1.0], vec![1.0]];
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let h = entropy_of(&refs).unwrap().entropy[0];
    assert!((h - 0.366_204_096_222_703_3).abs() < 1e-15);
}

proptest! {
    #[test]
    fn entropy_stays_within_bounds(k in 2usize..25, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let values: Vec<f64> = (0..k * d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let rows = rows_of(k, d, &values);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        for h in entropy_of(&refs).unwrap().entropy {
            prop_assert!(h >= 0.0 && h <= max_entropy(k) + 1e-15);
        }
    }

    #[test]
    fn entropy_ignores_positive_rescaling(k in 2usize..20, scale in 1e-3f64..1e3, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let values: Vec<f64> = (0..k * 3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let rows = rows_of(k, 3, &values);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let a = entropy_of(&rows.iter().map(Vec::as_slice).collect::<Vec<_>>()).unwrap();
        let b = entropy_of(&scaled.iter().map(Vec::as_slice).collect::<Vec<_>>()).unwrap();
        for (x, y) in a.entropy.iter().zip(&b.entropy) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn std_matches_streaming_oracle(k in 2usize..40, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let values: Vec<f64> = (0..k * 4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows = rows_of(k, 4, &values);
        let got = std_of(&rows.iter().map(Vec::as_slice).collect::<Vec<_>>());
        for i in 0..4 {
            // Welford
            let (mut mean, mut m2) = (0.0, 0.0);
            for (n, r) in rows.iter().enumerate() {
                let delta = r[i] - mean;
                mean += delta / (n + 1) as f64;
                m2 += delta * (r[i] - mean);
            }
            prop_assert!((got[i] - (m2 / k as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_rank_distance_is_invariant_under_relabelling(d in 2usize..12, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let mut a: Vec<usize> = (0..d).collect();
        let mut b: Vec<usize> = (0..d).collect();
        let mut relabel: Vec<usize> = (0..d).collect();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        relabel.shuffle(&mut rng);
        let pa: Vec<usize> = a.iter().map(|&i| relabel[i]).collect();
        let pb: Vec<usize> = b.iter().map(|&i| relabel[i]).collect();
        let x = weighted_spearman_distance(&a, &b).unwrap();
        let y = weighted_spearman_distance(&pa, &pb).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(weighted_spearman_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn concordance_is_symmetric(d in 2usize..15, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let wa: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wb: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ra = credattr::attribution::rank_by_magnitude(&wa);
        let rb = credattr::attribution::rank_by_magnitude(&wb);
        let k = rng.random_range(1..=d);
        prop_assert_eq!(topk_concordance(&ra, &wb, k).unwrap(), topk_concordance(&rb, &wa, k).unwrap());
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

#[test]
fn reversed_ranking_is_the_maximum_rank_distance() {
    for d in 2..=7 {
        let global: Vec<usize> = (0..d).collect();
        let reversed: Vec<usize> = (0..d).rev().collect();
        let at_reversal = weighted_spearman_distance(&reversed, &global).unwrap();
        let best = permutations(&global)
            .iter()
            .map(|p| weighted_spearman_distance(p, &global).unwrap())
            .fold(f64::MIN, f64::max);
        assert!((best - at_reversal).abs() < 1e-12, "d = {d}");
        assert!((at_reversal - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rank_distance_weights_the_top_of_the_global_ranking() {
    let global = [0, 1, 2, 3, 4, 5];
    let top_swap = weighted_spearman_distance(&[1, 0, 2, 3, 4, 5], &global).unwrap();
    let bottom_swap = weighted_spearman_distance(&[0, 1, 2, 3, 5, 4], &global).unwrap();
    assert!(top_swap > bottom_swap);
}

#[test]
fn rank_distance_rejects_non_permutations() {
    assert!(weighted_spearman_distance(&[0, 0, 1], &[0, 1, 2]).is_err());
    assert!(weighted_spearman_distance(&[0, 1], &[0, 1, 2]).is_err());
}

#[test]
fn l2_matches_naive_loop() {
    let mut rng = rng_from(8);
    for _ in 0..100 {
        let a: Vec<f64> = (0..23).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..23).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut sa = 0.0;
        let mut sb = 0.0;
        for i in 0..23 {
            sa += a[i].abs();
            sb += b[i].abs();
        }
        let mut acc = 0.0;
        for i in 0..23 {
            let diff = a[i].abs() / sa - b[i].abs() / sb;
            acc += diff * diff;
        }
        assert!((l2_distance(&a, &b).unwrap().unwrap() - acc.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn l2_of_disjoint_unit_masses_is_root_two() {
    let d = l2_distance(&[0.0, 4.0, 0.0], &[-0.5, 0.0, 0.0]).unwrap().unwrap();
    assert!((d - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(l2_distance(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(), None);
}

fn attribution(values: Vec<f64>) -> Attribution {
    Attribution {
        candidate: vec![0.0; values.len()],
        values,
        method: Method::IntegratedGradients,
        target: OutputTarget::Probability,
        candidate_id: None,
        reference_id: None,
        reference: None,
        steps_or_samples: 1,
        completeness_residual: None,
    }
}

#[test]
fn frequency_proportions_sum_to_k() {
    let mut rng = rng_from(2);
    let attrs: Vec<Attribution> = (0..50)
        .map(|_| attribution((0..8).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let names: Vec<String> = (0..8).map(|i| format!("f{i}")).collect();
    for k in 1..=8 {
        let r = global_ranking_by_frequency(&attrs, k, &names).unwrap();
        let total: f64 = r.iter().map(|f| f.proportion).sum();
        assert!((total - k as f64).abs() < 1e-12);
        assert!(r.iter().all(|f| (0.0..=1.0).contains(&f.proportion)));
    }
}

#[test]
fn experiment1_by_hand_on_five_features() {
    let names: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
    let weights = [0.5, -0.3, 0.1, 0.05, 0.05];
    let attrs = vec![
        attribution(vec![1.0, 0.5, 0.0, 0.0, 0.0]),
        attribution(vec![0.0, 0.5, 0.0, 0.0, 1.0]),
    ];
    let input = Exp1Input {
        feature_names: &names,
        global_weights: &weights,
        methods: vec![(Method::IntegratedGradients, &attrs)],
        mutual_information: Some(vec![0.3, 0.2, 0.1, 0.0, 0.0]),
    };
    let report = run_experiment1(&input, 2).unwrap();
    let t = &report.trust[0];
    // b is in both top-2 sets; a and e once each, a first by index.
    assert_eq!(t.global_ranking[0].name, "b");
    assert_eq!(t.global_ranking[0].proportion, 1.0);
    assert_eq!(t.global_ranking[1].name, "a");
    assert_eq!(t.top_k_agreement, 2);
    // |w| / 1.0 = [.5 .3 .1 .05 .05]; sample masses [2/3 1/3 0 0 0] and [0 1/3 0 0 2/3]
    let l2a: f64 = [1.0 / 6.0, 1.0 / 30.0, 0.1, 0.05, 0.05]
        .iter()
        .map(|v: &f64| v * v)
        .sum::<f64>()
        .sqrt();
    let l2b: f64 = [0.5, 1.0 / 30.0, 0.1, 0.05, 2.0 / 3.0 - 0.05]
        .iter()
        .map(|v: &f64| v * v)
        .sum::<f64>()
        .sqrt();
    assert!((t.mean_l2 - (l2a + l2b) / 2.0).abs() < 1e-12);
    assert_eq!(report.mutual_information.unwrap().top_k_agreement_with_weights, 2);
    assert_eq!(report.weight_ranking[0].name, "a");
}

#[test]
fn experiment1_on_a_single_sample_is_that_sample() {
    let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
    let weights = [0.1, 0.2, 0.3, 0.4];
    let attrs = vec![attribution(vec![0.4, 0.3, 0.2, 0.1])];
    let input = Exp1Input {
        feature_names: &names,
        global_weights: &weights,
        methods: vec![(Method::DeepLift, &attrs)],
        mutual_information: None,
    };
    let r = run_experiment1(&input, 2).unwrap();
    let t = &r.trust[0];
    assert_eq!(t.top_k_agreement, 0);
    assert_eq!(t.mean_weighted_rank_dist, 1.0);
    assert_eq!(
        t.global_ranking.iter().map(|f| f.index).collect::<Vec<_>>(),
        vec![0, 1, 2, 3]
    );
}
