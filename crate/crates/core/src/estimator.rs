//! Name-keyed registry of interchangeable estimators.
//!
//! Every method compared in cross-validation implements [`Estimator`]: it
//! receives a training fold and a test fold and returns one prediction per
//! test instance. The CLI and the CV driver select methods by name.

use std::fmt::Debug;

use rayon::prelude::*;

use crate::baselines::{knn_predict, random_baseline, KnnConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::placement::{L2pConfig, L2pModel};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPredictions {
    /// Aligned with the test fold's instances.
    pub predictions: Vec<f64>,
    /// Pairs the preference classifier was trained on, for pairwise methods.
    pub training_pairs: Option<usize>,
}

pub trait Estimator: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<FoldPredictions>;
}

#[derive(Debug, Clone, Default)]
pub struct L2pEstimator {
    pub config: L2pConfig,
}

impl Estimator for L2pEstimator {
    fn name(&self) -> &str {
        "l2p"
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<FoldPredictions> {
        let model = L2pModel::fit(&self.config, train, seed)?;
        let predictions = test
            .instances
            .par_iter()
            .map(|q| model.place(&q.features).map(|p| p.predicted_value))
            .collect::<Result<_>>()?;
        Ok(FoldPredictions {
            predictions,
            training_pairs: Some(model.n_pairs()),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnnEstimator {
    pub config: KnnConfig,
}

impl Estimator for KnnEstimator {
    fn name(&self) -> &str {
        "knn"
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset, _seed: u64) -> Result<FoldPredictions> {
        let predictions = test
            .instances
            .par_iter()
            .map(|q| knn_predict(train, &q.features, &self.config))
            .collect::<Result<_>>()?;
        Ok(FoldPredictions {
            predictions,
            training_pairs: None,
        })
    }
}

/// Predicts a random permutation of the test fold's own actual values.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomEstimator;

impl Estimator for RandomEstimator {
    fn name(&self) -> &str {
        "random"
    }

    fn fit_predict(&self, _train: &Dataset, test: &Dataset, seed: u64) -> Result<FoldPredictions> {
        Ok(FoldPredictions {
            predictions: random_baseline(&test.targets(), seed)?,
            training_pairs: None,
        })
    }
}

#[derive(Debug, Default)]
pub struct EstimatorRegistry {
    entries: Vec<Box<dyn Estimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `l2p`, `knn` and `random` with the given configurations.
    pub fn with_defaults(l2p: L2pConfig, knn: KnnConfig) -> Self {
        let mut r = Self::new();
        r.register(Box::new(L2pEstimator { config: l2p }))
            .and_then(|r| r.register(Box::new(KnnEstimator { config: knn })))
            .and_then(|r| r.register(Box::new(RandomEstimator)))
            .expect("default names are distinct");
        r
    }

    pub fn register(&mut self, estimator: Box<dyn Estimator>) -> Result<&mut Self> {
        if self.get(estimator.name()).is_some() {
            return Err(Error::invalid(format!(
                "estimator {:?} registered twice",
                estimator.name()
            )));
        }
        self.entries.push(estimator);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&dyn Estimator> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    /// Registration order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn all(&self) -> Vec<&dyn Estimator> {
        self.entries.iter().map(|e| e.as_ref()).collect()
    }

    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Vec<&dyn Estimator>> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .ok_or_else(|| Error::UnknownEstimator(n.as_ref().to_owned()))
            })
            .collect()
    }
}
