//! Learning to Place (L2P) for heavy-tailed outcome variables.
//!
//! The estimator works in two stages. A pairwise preference classifier learns
//! whether one instance's target exceeds another's from the concatenation of
//! their feature vectors. A new instance is then compared against every
//! training instance and placed on the target axis by voting over the regions
//! delimited by the unique training targets.
//!
//! Besides the estimator the crate ships the tail-aware evaluation metrics
//! (KS, EMD, Q-Q, threshold ROC), the kNN and random-shuffle baselines, the
//! label-noise robustness harness, and a cross-validation driver that runs any
//! set of registered estimators side by side.

pub mod baselines;
pub mod classifier;
pub mod cv;
pub mod data;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod pairs;
pub mod placement;
pub mod robustness;
pub mod seed;

pub use error::{Error, Result};
