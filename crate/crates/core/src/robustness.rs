//! Stage-two robustness under controlled pairwise-label noise.
//!
//! The learned classifier is replaced by the ground-truth ordering, corrupted
//! either uniformly or with a flip probability `exp(-alpha * |r_i - r_q|)`
//! that decays with the rank-percentile distance between the training
//! instance and the query. Percentiles live in [0, 1].

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::pairs::Label;
use crate::placement::{place, vote, BinPartition, TieRule, Verdict, VoteMode};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum ErrorMechanism {
    Random { p_c: f64 },
    DistanceDependent { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Random,
    Distance,
}

impl MechanismKind {
    pub fn with_parameter(self, value: f64) -> Result<ErrorMechanism> {
        let m = match self {
            MechanismKind::Random => ErrorMechanism::Random { p_c: value },
            MechanismKind::Distance => ErrorMechanism::DistanceDependent { alpha: value },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Random => "random",
            MechanismKind::Distance => "distance",
        }
    }
}

impl ErrorMechanism {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorMechanism::Random { p_c } if !(0.0..=1.0).contains(&p_c) => {
                Err(Error::invalid(format!("p_c = {p_c} outside [0, 1]")))
            }
            ErrorMechanism::DistanceDependent { alpha } if !(alpha >= 0.0) => {
                Err(Error::invalid(format!("alpha = {alpha} must be non-negative")))
            }
            _ => Ok(()),
        }
    }

    pub fn flip_probability(&self, rank: f64, q_rank: f64) -> f64 {
        match *self {
            ErrorMechanism::Random { p_c } => p_c,
            ErrorMechanism::DistanceDependent { alpha } => (-alpha * (rank - q_rank).abs()).exp(),
        }
    }
}

/// Ground-truth verdicts: `Greater` when the training target exceeds the
/// query's, `None` on ties.
pub fn oracle_labels(train_targets: &[f64], q_target: f64) -> Vec<Option<Label>> {
    train_targets
        .iter()
        .map(|&t| Label::from_targets(t, q_target))
        .collect()
}

/// Mid-rank percentile of `value` within `sorted`: `(#less + #equal / 2) / n`.
pub fn percentile_rank(sorted: &[f64], value: f64) -> f64 {
    let less = sorted.partition_point(|&t| t < value);
    let le = sorted.partition_point(|&t| t <= value);
    (less as f64 + (le - less) as f64 / 2.0) / sorted.len() as f64
}

/// Flips each present label independently with the mechanism's probability.
/// One uniform draw is consumed per position, abstentions included, so the
/// same seed always selects the same positions. Returns the corrupted labels
/// and the fraction of present labels that were flipped.
pub fn inject_errors(
    labels: &[Option<Label>],
    ranks: &[f64],
    q_rank: f64,
    mechanism: &ErrorMechanism,
    seed: u64,
) -> Result<(Vec<Option<Label>>, f64)> {
    mechanism.validate()?;
    if labels.len() != ranks.len() {
        return Err(Error::invalid("labels and ranks differ in length"));
    }
    let mut rng = seed::rng(seed, "inject", 0);
    let mut flips = 0usize;
    let mut present = 0usize;
    let out = labels
        .iter()
        .zip(ranks)
        .map(|(label, &r)| {
            let u: f64 = rng.gen();
            label.map(|l| {
                present += 1;
                if u < mechanism.flip_probability(r, q_rank) {
                    flips += 1;
                    l.flipped()
                } else {
                    l
                }
            })
        })
        .collect();
    let fraction = if present == 0 {
        0.0
    } else {
        flips as f64 / present as f64
    };
    Ok((out, fraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub parameter: f64,
    pub realized_accuracy: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub mechanism: MechanismKind,
    pub points: Vec<RobustnessPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_folds: usize,
    pub n_strata: usize,
    pub seed: u64,
}

/// Cross-validated placement with corrupted oracle verdicts, one point per
/// grid value. Each held-out instance is placed against its training fold;
/// AUC is computed over the union of all folds.
pub fn robustness_sweep(
    dataset: &Dataset,
    kind: MechanismKind,
    grid: &[f64],
    cfg: &SweepConfig,
) -> Result<RobustnessCurve> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("robustness grid"));
    }
    let mechanisms: Vec<ErrorMechanism> = grid
        .iter()
        .map(|&v| kind.with_parameter(v))
        .collect::<Result<_>>()?;
    let folds = stratified_kfold(dataset, cfg.n_folds, cfg.n_strata, seed::derive(cfg.seed, "folds", 0))?;

    struct FoldContext {
        train_ids: Vec<usize>,
        train_targets: Vec<f64>,
        train_ranks: Vec<f64>,
        sorted_targets: Vec<f64>,
        partition: BinPartition,
        test: Vec<usize>,
    }
    let contexts: Vec<FoldContext> = (0..cfg.n_folds)
        .map(|f| {
            let (train, test) = folds.split(dataset, f);
            let train_ids: Vec<usize> = train.iter().map(|&p| dataset.instances[p].id).collect();
            let train_targets: Vec<f64> = train.iter().map(|&p| dataset.instances[p].target).collect();
            let mut sorted_targets = train_targets.clone();
            sorted_targets.sort_by(f64::total_cmp);
            let train_ranks = train_targets
                .iter()
                .map(|&t| percentile_rank(&sorted_targets, t))
                .collect();
            let partition = BinPartition::new(train_ids.iter().copied().zip(train_targets.iter().copied()))?;
            Ok(FoldContext {
                train_ids,
                train_targets,
                train_ranks,
                sorted_targets,
                partition,
                test,
            })
        })
        .collect::<Result<_>>()?;

    let actual = dataset.targets();
    let mut points = Vec::with_capacity(grid.len());
    for (g, mechanism) in mechanisms.iter().enumerate() {
        let grid_seed = seed::derive(cfg.seed, "robustness-grid", g as u64);
        let mut predicted = vec![0.0; dataset.len()];
        let (mut flipped, mut labelled) = (0.0, 0usize);
        for ctx in &contexts {
            let results: Vec<(usize, f64, f64, usize)> = ctx
                .test
                .par_iter()
                .map(|&pos| {
                    let q = &dataset.instances[pos];
                    let labels = oracle_labels(&ctx.train_targets, q.target);
                    let q_rank = percentile_rank(&ctx.sorted_targets, q.target);
                    let (noisy, fraction) = inject_errors(
                        &labels,
                        &ctx.train_ranks,
                        q_rank,
                        mechanism,
                        seed::derive(grid_seed, "instance", q.id as u64),
                    )?;
                    let verdicts: Vec<Verdict> = ctx
                        .train_ids
                        .iter()
                        .zip(&noisy)
                        .filter_map(|(&id, l)| l.map(|l| Verdict::from_label(id, l)))
                        .collect();
                    let tally = vote(&ctx.partition, &verdicts, VoteMode::Plain)?;
                    let placed = place(&tally, &ctx.partition, TieRule::default())?;
                    Ok((pos, placed.predicted_value, fraction, verdicts.len()))
                })
                .collect::<Result<_>>()?;
            for (pos, value, fraction, n_labels) in results {
                predicted[pos] = value;
                flipped += fraction * n_labels as f64;
                labelled += n_labels;
            }
        }
        points.push(RobustnessPoint {
            parameter: grid[g],
            realized_accuracy: 1.0 - flipped / labelled as f64,
            auc: roc_auc(&actual, &predicted)?.auc,
        });
    }
    Ok(RobustnessCurve {
        mechanism: kind,
        points,
    })
}
