//! Bayesian dual-head test-time adaptation for federated learning.
//!
//! The crate bundles the adaptation algorithm ([`adapter`]) with the pieces
//! needed to exercise it end to end: probability primitives ([`bayes`]),
//! discretized feature likelihoods ([`dle`]), a deterministic federated
//! simulator ([`fedsim`]), comparison strategies ([`baselines`]), the
//! five-stream benchmark ([`bench`]), and experiment orchestration.

pub mod adapter;
pub mod baselines;
pub mod bayes;
pub mod bench;
pub mod config;
pub mod diagnostics;
pub mod dle;
pub mod error;
pub mod experiment;
pub mod fedsim;
pub mod method;
pub mod rng;
pub mod selftest;

pub use error::{BtflError, Result};
