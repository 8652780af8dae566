use std::collections::BTreeSet;

use l2p_core::data::{
    ccdf_points, generate_synthetic, kurtosis, parse_csv, stratified_kfold, Dataset, SyntheticConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

fn dataset_from_targets(targets: &[f64]) -> Dataset {
    let rows = targets.iter().map(|&t| vec![t * 0.5, 1.0]).collect();
    Dataset::from_rows(rows, targets.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn kurtosis_is_affine_invariant(
        xs in prop::collection::vec(-100.0f64..100.0, 4..60),
        a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        b in -100.0f64..100.0,
    ) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        prop_assume!(var > 1e-3);
        let k = kurtosis(&xs).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let k2 = kurtosis(&ys).unwrap();
        prop_assert!((k - k2).abs() <= 1e-9 * k.abs(), "{k} vs {k2}");
    }

    #[test]
    fn ccdf_starts_at_one_and_never_increases(xs in prop::collection::vec(-5i32..5, 1..80)) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let pts = ccdf_points(&xs).unwrap();
        prop_assert_eq!(pts[0].1, 1.0);
        for w in pts.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 > w[1].1);
        }
        let distinct: BTreeSet<i64> = xs.iter().map(|&x| x as i64).collect();
        prop_assert_eq!(pts.len(), distinct.len());
        for &(v, p) in &pts {
            let ge = xs.iter().filter(|&&x| x >= v).count() as f64 / xs.len() as f64;
            prop_assert_eq!(p, ge);
        }
    }

    #[test]
    fn stratified_folds_partition_the_dataset(
        targets in prop::collection::vec(0.0f64..50.0, 5..150),
        k in 2usize..8,
        strata in 1usize..15,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= targets.len());
        let ds = dataset_from_targets(&targets);
        let folds = stratified_kfold(&ds, k, strata, seed).unwrap();
        prop_assert_eq!(folds.fold_of.len(), ds.len());
        prop_assert!(folds.fold_of.values().all(|&f| f < k));
        let sizes = folds.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut seen = vec![0usize; ds.len()];
        for f in 0..k {
            let (train, test) = folds.split(&ds, f);
            prop_assert_eq!(train.len() + test.len(), ds.len());
            for p in test {
                seen[p] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), -1e9f64..1e9), 1..30)) {
        let (features, targets): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let ds = Dataset::from_rows(features, targets).unwrap();
        let back = parse_csv(&ds.to_csv().unwrap(), Some("target")).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn extreme_targets_reach_every_fold() {
    let targets: Vec<f64> = (0..100).map(|i| (i as f64).exp2()).collect();
    let ds = dataset_from_targets(&targets);
    for seed in 0..5 {
        let folds = stratified_kfold(&ds, 5, 10, seed).unwrap();
        let mut top = [0usize; 5];
        for id in 90..100 {
            top[folds.fold_of[&id]] += 1;
        }
        assert_eq!(top, [2; 5]);
    }
}

#[test]
fn normal_sample_kurtosis_is_three() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
    let k = kurtosis(&xs).unwrap();
    assert!((k - 3.0).abs() < 0.1, "{k}");
}

#[test]
fn uniform_sample_kurtosis_matches_integral() {
    // midpoint-rule moments of U[0,1] about its mean
    let steps = 100_000;
    let (mut m2, mut m4) = (0.0, 0.0);
    for i in 0..steps {
        let d = (i as f64 + 0.5) / steps as f64 - 0.5;
        m2 += d * d / steps as f64;
        m4 += d.powi(4) / steps as f64;
    }
    let expected = m4 / (m2 * m2);
    assert!((expected - 1.8).abs() < 1e-6);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..200_000).map(|_| rng.gen::<f64>()).collect();
    assert!((kurtosis(&xs).unwrap() - expected).abs() < 0.05);
}

fn synth(n: usize, d: usize, tail_index: f64, noise_scale: f64, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n,
        d,
        tail_index,
        noise_scale,
        seed,
    })
    .unwrap()
}

#[test]
fn synthetic_targets_are_heavy_tailed() {
    let ds = synth(4096, 9, 1.5, 0.0, 0);
    assert!(kurtosis(&ds.targets()).unwrap() > 30.0);
}

#[test]
fn synthetic_kurtosis_falls_with_tail_index() {
    let median_kurtosis = |alpha: f64| {
        let mut ks: Vec<f64> = (0..5)
            .map(|s| kurtosis(&synth(10_000, 3, alpha, 0.5, s).targets()).unwrap())
            .collect();
        ks.sort_by(f64::total_cmp);
        ks[2]
    };
    let k: Vec<f64> = [1.2, 2.0, 3.0].iter().map(|&a| median_kurtosis(a)).collect();
    assert!(k[0] > k[1] && k[1] > k[2], "{k:?}");
}

#[test]
fn noiseless_target_is_monotone_in_the_score() {
    // one feature: the score is a positive multiple of it
    let ds = synth(300, 1, 1.5, 0.0, 4);
    let mut by_feature = ds.instances.clone();
    by_feature.sort_by(|a, b| a.features[0].total_cmp(&b.features[0]));
    assert!(by_feature.windows(2).all(|w| w[0].target < w[1].target));

    // positive weights: componentwise dominance implies a larger target
    let ds = synth(400, 3, 2.0, 0.0, 5);
    for a in &ds.instances {
        for b in &ds.instances {
            if a.id != b.id && a.features.iter().zip(&b.features).all(|(x, y)| x > y) {
                assert!(a.target > b.target);
            }
        }
    }
}

#[test]
fn synthetic_generator_is_deterministic() {
    assert_eq!(synth(200, 4, 1.5, 0.3, 9), synth(200, 4, 1.5, 0.3, 9));
    assert_ne!(synth(200, 4, 1.5, 0.3, 9), synth(200, 4, 1.5, 0.3, 10));
}

#[test]
fn synthetic_rejects_bad_parameters() {
    let base = SyntheticConfig {
        n: 100,
        d: 2,
        tail_index: 1.5,
        noise_scale: 0.0,
        seed: 0,
    };
    assert!(generate_synthetic(&SyntheticConfig { tail_index: 0.0, ..base }).is_err());
    assert!(generate_synthetic(&SyntheticConfig { tail_index: -1.0, ..base }).is_err());
    assert!(generate_synthetic(&SyntheticConfig { n: 9, ..base }).is_err());
    assert!(generate_synthetic(&SyntheticConfig { d: 0, ..base }).is_err());
}

#[test]
fn csv_errors_name_the_problem() {
    use l2p_core::Error;
    assert!(matches!(parse_csv("a,b\n1,2\n", Some("t")), Err(Error::MissingTargetColumn(_))));
    assert!(matches!(
        parse_csv("a,t\n1,2\n3,x\n", Some("t")),
        Err(Error::NonNumeric { row: 2, .. })
    ));
    assert!(matches!(parse_csv("a,t\n1,2\n3\n", Some("t")), Err(Error::RaggedRow { row: 2, .. })));
    assert!(matches!(parse_csv("a,t\n", Some("t")), Err(Error::EmptyDataset)));
    assert!(matches!(
        kurtosis(&[4.0; 4]),
        Err(Error::UndefinedKurtosis(_))
    ));
}
