//! Reference predictors: k-nearest-neighbour regression and the shuffled
//! actuals baseline.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Unweighted mean target of the `k` nearest training instances under
/// Euclidean distance; equal distances are broken by instance id.
pub fn knn_predict(train: &Dataset, q: &[f64], config: &KnnConfig) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if q.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: q.len(),
        });
    }
    if config.k == 0 || config.k > train.len() {
        return Err(Error::invalid(format!(
            "k = {} outside [1, {}]",
            config.k,
            train.len()
        )));
    }
    let mut dist: Vec<(f64, usize, f64)> = train
        .instances
        .iter()
        .map(|i| {
            let d2: f64 = i.features.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i.id, i.target)
        })
        .collect();
    let by_distance = |a: &(f64, usize, f64), b: &(f64, usize, f64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if config.k < dist.len() {
        dist.select_nth_unstable_by(config.k - 1, by_distance);
        dist.truncate(config.k);
    }
    Ok(dist.iter().map(|d| d.2).sum::<f64>() / config.k as f64)
}

/// A seeded permutation of `actual`, used as predictions.
pub fn random_baseline(actual: &[f64], seed: u64) -> Result<Vec<f64>> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("random baseline over an empty sample"));
    }
    let mut out = actual.to_vec();
    out.shuffle(&mut seed::rng(seed, "random-baseline", 0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_one_neighbour() {
        let train = Dataset::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![3.0, 8.0]).unwrap();
        assert_eq!(knn_predict(&train, &[1.0, 1.0], &KnnConfig { k: 1 }).unwrap(), 8.0);
    }

    #[test]
    fn equidistant_pair_averages() {
        let train = Dataset::from_rows(vec![vec![0.0], vec![2.0]], vec![0.0, 10.0]).unwrap();
        assert_eq!(knn_predict(&train, &[1.0], &KnnConfig { k: 2 }).unwrap(), 5.0);
        // tie on distance goes to the lower id
        assert_eq!(knn_predict(&train, &[1.0], &KnnConfig { k: 1 }).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let train = Dataset::from_rows(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(knn_predict(&train, &[0.0, 1.0], &KnnConfig { k: 1 }).is_err());
        assert!(knn_predict(&train, &[0.0], &KnnConfig { k: 2 }).is_err());
        assert!(random_baseline(&[], 0).is_err());
    }

    #[test]
    fn random_baseline_is_deterministic_permutation() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let p = random_baseline(&a, 5).unwrap();
        assert_eq!(p, random_baseline(&a, 5).unwrap());
        assert_ne!(p, a);
        let mut s = p.clone();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, a);
    }
}
