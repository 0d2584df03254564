mod common;

use credattr::model::Classifier;
use credattr::reference::{
    boundary_references, build_boundary_pool, euclidean, profile_catalog, random_references, tight_references,
    CatalogOptions, PoolMember, PoolSource,
};

#[test]
fn random_references_stay_inside_observed_ranges() {
    let fx = common::trained(1000, 1);
    let set = random_references(&fx.scaler, 10_000, 3)
        .unwrap()
        .with_raw(&fx.scaler)
        .unwrap();
    assert_eq!(set.len(), 10_000);
    for raw in &set.raw {
        for (j, v) in raw.iter().enumerate() {
            assert!(*v >= fx.scaler.min[j] - 1e-9 && *v <= fx.scaler.max[j] + 1e-9);
        }
    }
    let again = random_references(&fx.scaler, 10_000, 3).unwrap();
    assert_eq!(again.references, set.references);
}

#[test]
fn boundary_references_sit_on_the_boundary() {
    let fx = common::trained(3000, 2);
    let set = boundary_references(&fx.mlp, &fx.scaler, 50, 0.01, 7, 5_000_000).unwrap();
    assert_eq!(set.len(), 50);
    for r in &set.references {
        assert!((fx.mlp.p_bad(r).unwrap() - 0.5).abs() <= 0.01);
    }
    let rate = set.acceptance_rate.unwrap();
    assert!(rate > 0.0 && rate <= 1.0);
}

#[test]
fn boundary_search_reports_exhaustion() {
    let fx = common::trained(1000, 2);
    let err = boundary_references(&fx.mlp, &fx.scaler, 5, 1e-12, 7, 200).unwrap_err();
    assert!(matches!(err, credattr::Error::Exhausted { wanted: 5, .. }), "{err}");
}

#[test]
fn tight_references_match_brute_force() {
    let fx = common::trained(3000, 3);
    let pool = build_boundary_pool(&fx.mlp, &fx.validation, &fx.scaler, 0.05, 40, 4, 5_000_000).unwrap();
    assert!(pool.members.len() >= 40);
    for i in 0..10 {
        let x = fx.validation.row(i);
        let set = tight_references(&fx.mlp, &pool.members, x, 7, 0.05).unwrap();
        let mut brute: Vec<(f64, usize)> = pool
            .members
            .iter()
            .enumerate()
            .map(|(j, m)| (euclidean(x, &m.values), j))
            .collect();
        brute.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<PoolSource> = brute.iter().take(7).map(|&(_, j)| pool.members[j].source).collect();
        assert_eq!(set.sources, expected);
        assert!(set.distances.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn tight_references_skip_members_outside_the_band() {
    let fx = common::trained(1000, 3);
    let x = fx.validation.row(0).to_vec();
    let pool = vec![
        PoolMember {
            values: x.clone(),
            source: PoolSource::Dataset(0),
        };
        3
    ];
    let in_band = (fx.mlp.p_bad(&x).unwrap() - 0.5).abs() <= 0.01;
    let r = tight_references(&fx.mlp, &pool, &x, 2, 0.01);
    assert_eq!(r.is_ok(), in_band);
}

#[test]
fn profile_catalog_has_the_three_profiles() {
    let fx = common::trained(3000, 4);
    let profiles = profile_catalog(&fx.mlp, &fx.train, &fx.scaler, CatalogOptions::default()).unwrap();
    let names: Vec<&str> = profiles.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["unclassifiable", "average candidate", "new candidate"]);
    assert!((profiles[0].sigma[1] - 0.5).abs() <= 0.01);
    let new = &profiles[2].summary;
    assert_eq!(new.credit_trades, Some(0.0));
    assert_eq!(new.percent_accounts_with_balance, None);
    for p in &profiles {
        assert!((p.sigma[0] + p.sigma[1] - 1.0).abs() < 1e-12);
    }
}
