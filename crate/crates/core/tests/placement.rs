use l2p_core::classifier::PreferenceModel;
use l2p_core::data::{Dataset, Instance};
use l2p_core::pairs::Label;
use l2p_core::placement::{
    build_partition, place, predict, vote, BinPartition, TieRule, Verdict, VoteMode,
};
use proptest::prelude::*;

/// Per-region score computed directly from the likelihood: a voter at edge
/// `e` agrees with region `j` when its label says the query lies on `j`'s
/// side of `u_e`.
fn brute_force_tally(edges: &[f64], targets: &[f64], labels: &[Option<Label>]) -> Vec<f64> {
    (0..=edges.len())
        .map(|j| {
            targets
                .iter()
                .zip(labels)
                .filter_map(|(&t, l)| l.map(|l| (t, l)))
                .map(|(t, l)| {
                    let e = edges.iter().position(|&u| u == t).unwrap();
                    let query_below_edge = j <= e;
                    if query_below_edge == (l == Label::Greater) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .sum()
        })
        .collect()
}

fn oracle_verdicts(targets: &[f64], q: f64) -> Vec<Verdict> {
    targets
        .iter()
        .enumerate()
        .filter_map(|(id, &t)| Label::from_targets(t, q).map(|l| Verdict::from_label(id, l)))
        .collect()
}

/// Targets with repeats plus a query strictly inside one region.
fn instance() -> impl Strategy<Value = (Vec<f64>, usize, f64)> {
    (prop::collection::vec(0i32..12, 2..30), any::<prop::sample::Index>(), 0.01f64..0.99).prop_filter_map(
        "needs two distinct targets",
        |(raw, idx, frac)| {
            let targets: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let p = build_partition(&targets).ok()?;
            let j = idx.index(p.n_regions());
            let q = match p.region_bounds(j) {
                (Some(lo), Some(hi)) => lo + frac * (hi - lo),
                (None, Some(hi)) => hi - 1.0 - frac,
                (Some(lo), None) => lo + 1.0 + frac,
                (None, None) => unreachable!(),
            };
            Some((targets, j, q))
        },
    )
}

proptest! {
    #[test]
    fn oracle_tally_peaks_uniquely_at_the_true_region((targets, j, q) in instance()) {
        let p = build_partition(&targets).unwrap();
        let verdicts = oracle_verdicts(&targets, q);
        let tally = vote(&p, &verdicts, VoteMode::Plain).unwrap();
        let labels: Vec<Option<Label>> = targets.iter().map(|&t| Label::from_targets(t, q)).collect();
        prop_assert_eq!(&tally.votes, &brute_force_tally(p.edges(), &targets, &labels));
        prop_assert_eq!(tally.votes[j], targets.len() as f64);
        prop_assert!(tally.votes.iter().enumerate().all(|(r, &v)| r == j || v < tally.votes[j]));
        let placed = place(&tally, &p, TieRule::default()).unwrap();
        prop_assert_eq!(placed.region, j);
        prop_assert_eq!(placed.tied_regions, vec![j]);
    }

    #[test]
    fn plain_tally_bounds_and_parity(
        (targets, _, q) in instance(),
        flips in prop::collection::vec(any::<bool>(), 30),
    ) {
        let p = build_partition(&targets).unwrap();
        let verdicts: Vec<Verdict> = oracle_verdicts(&targets, q)
            .into_iter()
            .zip(&flips)
            .map(|(v, &f)| if f { Verdict::from_label(v.id, v.label.flipped()) } else { v })
            .collect();
        let n = verdicts.len() as f64;
        let tally = vote(&p, &verdicts, VoteMode::Plain).unwrap();
        for &v in &tally.votes {
            prop_assert!(v.abs() <= n);
            prop_assert_eq!((v - n).rem_euclid(2.0), 0.0);
        }
        let placed = place(&tally, &p, TieRule::default()).unwrap();
        let edges = p.edges();
        prop_assert!(placed.predicted_value >= edges[0] && placed.predicted_value <= edges[edges.len() - 1]);
    }

    #[test]
    fn flipping_one_label_moves_each_region_by_two((targets, _, q) in instance(), which in any::<prop::sample::Index>()) {
        let p = build_partition(&targets).unwrap();
        let verdicts = oracle_verdicts(&targets, q);
        let i = which.index(verdicts.len());
        let mut flipped = verdicts.clone();
        flipped[i] = Verdict::from_label(verdicts[i].id, verdicts[i].label.flipped());
        let before = vote(&p, &verdicts, VoteMode::Plain).unwrap().votes;
        let after = vote(&p, &flipped, VoteMode::Plain).unwrap().votes;
        let e = p.edge_of(verdicts[i].id).unwrap();
        // a voter that switches to "greater" gains every region below its edge
        let s = flipped[i].label.sign();
        for (j, (b, a)) in before.iter().zip(&after).enumerate() {
            let expected = if j <= e { 2.0 * s } else { -2.0 * s };
            prop_assert_eq!(a - b, expected);
        }
    }

    #[test]
    fn weighted_vote_with_certain_probabilities_finds_the_true_region((targets, j, q) in instance()) {
        let p = build_partition(&targets).unwrap();
        let tally = vote(&p, &oracle_verdicts(&targets, q), VoteMode::Weighted).unwrap();
        let best = tally.votes[j];
        prop_assert!(tally.votes.iter().enumerate().all(|(r, &v)| r == j || v < best));
    }

    #[test]
    fn verdict_order_does_not_change_the_tally((targets, _, q) in instance(), seed in any::<u64>()) {
        let p = build_partition(&targets).unwrap();
        let mut verdicts: Vec<Verdict> = oracle_verdicts(&targets, q)
            .into_iter()
            .enumerate()
            .map(|(k, v)| Verdict { prob_greater: ((k as u64 ^ seed) % 97) as f64 / 96.0, ..v })
            .collect();
        let a = vote(&p, &verdicts, VoteMode::Weighted).unwrap();
        verdicts.reverse();
        let r = (seed % verdicts.len() as u64) as usize;
        verdicts.rotate_left(r);
        prop_assert_eq!(a, vote(&p, &verdicts, VoteMode::Weighted).unwrap());
    }

    #[test]
    fn predict_ignores_training_order(
        rows in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 2), 0i32..20), 3..30),
        q in prop::collection::vec(0.0f64..1.0, 2),
        rot in any::<prop::sample::Index>(),
    ) {
        let (features, targets): (Vec<_>, Vec<f64>) = rows.into_iter().map(|(f, t)| (f, f64::from(t))).unzip();
        let ds = Dataset::from_rows(features, targets).unwrap();
        prop_assume!(ds.distinct_targets() >= 2);
        let mut instances: Vec<Instance> = ds.instances.clone();
        instances.reverse();
        let r = rot.index(instances.len());
        instances.rotate_left(r);
        let shuffled = Dataset::new(instances, ds.feature_names.clone(), "target").unwrap();
        for mode in [VoteMode::Plain, VoteMode::Weighted] {
            prop_assert_eq!(
                predict(&SumModel, &ds, &q, mode).unwrap(),
                predict(&SumModel, &shuffled, &q, mode).unwrap()
            );
        }
    }
}

/// Compares feature sums through a logistic link.
#[derive(Debug)]
struct SumModel;

impl PreferenceModel for SumModel {
    fn input_dim(&self) -> usize {
        4
    }

    fn predict_prob(&self, x: &[f64]) -> f64 {
        let diff = x[0] + x[1] - x[2] - x[3];
        1.0 / (1.0 + (-3.0 * diff).exp())
    }
}

#[test]
fn hand_trace() {
    let p = build_partition(&[1.0, 5.0, 10.0]).unwrap();
    let tally = vote(&p, &oracle_verdicts(&[1.0, 5.0, 10.0], 3.0), VoteMode::Plain).unwrap();
    assert_eq!(tally.votes, vec![1.0, 3.0, 1.0, -1.0]);
    let placed = place(&tally, &p, TieRule::default()).unwrap();
    assert_eq!((placed.region, placed.predicted_value), (1, 3.0));
    assert_eq!((placed.lower, placed.upper), (Some(1.0), Some(5.0)));
}

#[test]
fn weighted_half_probabilities_by_hand() {
    let p = build_partition(&[1.0, 5.0, 10.0]).unwrap();
    let verdicts: Vec<Verdict> = (0..3)
        .map(|id| Verdict {
            id,
            label: Label::Greater,
            prob_greater: 0.5,
        })
        .collect();
    let tally = vote(&p, &verdicts, VoteMode::Weighted).unwrap();
    // edge e spreads 0.5 over e+1 regions below and 0.5 over 3-e above
    let expected = [
        0.5 + 0.25 + 0.5 / 3.0,
        0.5 / 3.0 + 0.25 + 0.5 / 3.0,
        0.5 / 3.0 + 0.25 + 0.5 / 3.0,
        0.5 / 3.0 + 0.25 + 0.5,
    ];
    for (a, b) in tally.votes.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    // symmetric under reversing the axis
    assert!((tally.votes[0] - tally.votes[3]).abs() < 1e-15);
    assert!((tally.votes[1] - tally.votes[2]).abs() < 1e-15);
}

#[test]
fn partition_with_repeated_targets() {
    let p = build_partition(&[5.0, 5.0, 5.0, 7.0]).unwrap();
    assert_eq!(p.edges(), &[5.0, 7.0]);
    assert_eq!(p.n_regions(), 3);
    assert_eq!(p.edge_instances(0), &[0, 1, 2]);
    assert!(build_partition(&[3.0]).is_err());
    assert!(BinPartition::new([(0, 1.0), (0, 2.0)]).is_err());
}

/// Exact comparator on a single feature.
#[derive(Debug)]
struct StrictModel;

impl PreferenceModel for StrictModel {
    fn input_dim(&self) -> usize {
        2
    }

    fn predict_prob(&self, x: &[f64]) -> f64 {
        if x[0] > x[1] {
            1.0
        } else {
            0.0
        }
    }
}

#[test]
fn queries_outside_the_training_range_clamp_to_the_extremes() {
    let xs = [2.0, 4.0, 4.0, 7.0, 9.0];
    let ds = Dataset::from_rows(xs.iter().map(|&x| vec![x]).collect(), xs.to_vec()).unwrap();
    for mode in [VoteMode::Plain, VoteMode::Weighted] {
        let high = predict(&StrictModel, &ds, &[50.0], mode).unwrap();
        assert_eq!((high.region, high.predicted_value, high.upper), (4, 9.0, None));
        let low = predict(&StrictModel, &ds, &[-3.0], mode).unwrap();
        assert_eq!((low.region, low.predicted_value, low.lower), (0, 2.0, None));
        let mid = predict(&StrictModel, &ds, &[5.0], mode).unwrap();
        assert_eq!((mid.region, mid.predicted_value), (2, 5.5));
    }
}
