//! Monte Carlo estimate of the expected interpolation coefficient.
//!
//! Draws `m ~ Beta(α, β)` directly and averages `m / (m + (1 − m) τ̂)`. It
//! shares no code with the quadrature path and serves as its oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use super::beta::BetaParams;

/// Minimum number of draws accepted by [`mc_oracle_e`].
pub const MIN_SAMPLES: usize = 10_000;

/// Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

pub fn mc_oracle_estimate(prior: &BetaParams, tau_hat: f64, n_samples: usize, seed: u64) -> McEstimate {
    assert!(
        n_samples >= MIN_SAMPLES,
        "n_samples must be >= {MIN_SAMPLES}, got {n_samples}"
    );
    assert!(tau_hat.is_finite() && tau_hat > 0.0, "tau_hat must be positive");
    let dist = Beta::new(prior.alpha, prior.beta).expect("valid Beta parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let m: f64 = dist.sample(&mut rng);
        let v = m / (m + (1.0 - m) * tau_hat);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// Deterministic Monte Carlo estimate of `E[m / (m + (1 − m) τ̂)]`.
pub fn mc_oracle_e(prior: &BetaParams, tau_hat: f64, n_samples: usize, seed: u64) -> f64 {
    mc_oracle_estimate(prior, tau_hat, n_samples, seed).mean
}
