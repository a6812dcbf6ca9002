//! Target-focused feature acquisition with a variational Bayesian confidence
//! score, plus mutual-information and mRMR baselines and a benchmark harness.
//!
//! The core loop trains a mean-field Gaussian Bayesian linear classifier per
//! candidate feature, scores each candidate by sampled confidence in a single
//! focus target plus two redundancy scores against the already-acquired
//! features, and greedily acquires the best feature until a budget or a
//! metric threshold stops it.

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod scoring;
pub mod selector;
pub mod synthetic;
pub mod vi;

pub use error::{Error, Result};
