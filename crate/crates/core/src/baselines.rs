//! Reference strategies: single-head predictions, a fixed mixture, a
//! label-aware per-sample oracle, and a simplified FedTHE-style interpolation.

use serde::{Deserialize, Serialize};

use crate::bayes::{entropy, softmax, ProbVector};
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};

pub fn local_only(logits_l: &[f64]) -> ProbVector {
    softmax(logits_l)
}

pub fn global_only(logits_g: &[f64]) -> ProbVector {
    softmax(logits_g)
}

/// `e₀ · softmax(g) + (1 − e₀) · softmax(l)`.
pub fn fixed_mix(logits_l: &[f64], logits_g: &[f64], e0: f64) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&e0) {
        return Err(BtflError::Domain(format!("mixing weight must lie in [0, 1], got {e0}")));
    }
    softmax(logits_l).mix(&softmax(logits_g), e0)
}

/// Per-sample best of the two heads. A head whose argmax is the true label
/// wins; if both or neither are right, the one with more mass on the label
/// wins, ties to local. Returns the prediction and whether the global head
/// was chosen.
pub fn oracle_mix(logits_l: &[f64], logits_g: &[f64], true_label: usize) -> (ProbVector, bool) {
    let y_l = softmax(logits_l);
    let y_g = softmax(logits_g);
    let ok_l = y_l.argmax() == true_label;
    let ok_g = y_g.argmax() == true_label;
    let choose_global = match (ok_l, ok_g) {
        (true, true) => false,
        (false, true) => true,
        (true, false) => false,
        (false, false) => y_g[true_label] > y_l[true_label],
    };
    if choose_global {
        (y_g, true)
    } else {
        (y_l, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedTheLiteConfig {
    pub steps: usize,
    pub step_size: f64,
    pub ema_ratio: f64,
    /// Central-difference step for the scalar gradient.
    pub fd_step: f64,
    pub e_init: f64,
}

impl Default for FedTheLiteConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            step_size: 0.1,
            ema_ratio: 0.9,
            fd_step: 1e-4,
            e_init: 0.5,
        }
    }
}

/// Per-stream state: the warm-started coefficient and the test-feature EMA.
#[derive(Debug, Clone, PartialEq)]
pub struct FedTheLiteState {
    pub e: f64,
    pub feature_ema: Option<Vec<f64>>,
    pub config: FedTheLiteConfig,
    local_mean: Vec<f64>,
    global_mean: Vec<f64>,
}

/// Diagnostics of one adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct FedTheLiteStep {
    pub y: ProbVector,
    pub e: f64,
    /// Cosine similarity of the two heads' softmax outputs.
    pub lambda_s: f64,
    /// Objective value before the first step and after each step.
    pub objective_trace: Vec<f64>,
}

impl FedTheLiteState {
    pub fn new(local_mean: Vec<f64>, global_mean: Vec<f64>, config: FedTheLiteConfig) -> Self {
        Self {
            e: config.e_init.clamp(0.0, 1.0),
            feature_ema: None,
            config,
            local_mean,
            global_mean,
        }
    }

    /// `λ_s · H(mix(e)) + (1 − λ_s) · ‖ema − ((1 − e) μ_l + e μ_g)‖²`.
    fn objective(&self, e: f64, lambda_s: f64, y_l: &ProbVector, y_g: &ProbVector, ema: &[f64]) -> f64 {
        let mixed = y_l.mix(y_g, e).expect("matching class counts");
        let align: f64 = ema
            .iter()
            .zip(self.local_mean.iter().zip(&self.global_mean))
            .map(|(x, (l, g))| {
                let target = (1.0 - e) * l + e * g;
                (x - target) * (x - target)
            })
            .sum();
        lambda_s * entropy(&mixed) + (1.0 - lambda_s) * align
    }
}

pub fn fedthe_lite_adapt(
    state: &mut FedTheLiteState,
    z: &FeatureVector,
    logits_l: &[f64],
    logits_g: &[f64],
) -> Result<FedTheLiteStep> {
    if logits_l.len() != logits_g.len() {
        return Err(BtflError::DimensionMismatch {
            expected: logits_l.len(),
            actual: logits_g.len(),
        });
    }
    if z.dim() != state.local_mean.len() {
        return Err(BtflError::DimensionMismatch {
            expected: state.local_mean.len(),
            actual: z.dim(),
        });
    }
    let y_l = softmax(logits_l);
    let y_g = softmax(logits_g);
    let lambda_s = y_l.cosine(&y_g).clamp(0.0, 1.0);
    let ema = state
        .feature_ema
        .clone()
        .unwrap_or_else(|| z.as_slice().to_vec());

    let cfg = state.config;
    let f = |e: f64| state.objective(e, lambda_s, &y_l, &y_g, &ema);
    let mut e = state.e;
    let mut current = f(e);
    let mut step = cfg.step_size;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(current);
    for _ in 0..cfg.steps {
        let lo = (e - cfg.fd_step).max(0.0);
        let hi = (e + cfg.fd_step).min(1.0);
        let grad = (f(hi) - f(lo)) / (hi - lo);
        let candidate = (e - step * grad).clamp(0.0, 1.0);
        let value = f(candidate);
        if value <= current {
            e = candidate;
            current = value;
        } else {
            step *= 0.5;
        }
        trace.push(current);
    }

    let r = cfg.ema_ratio;
    state.feature_ema = Some(
        ema.iter()
            .zip(z.as_slice())
            .map(|(m, x)| r * m + (1.0 - r) * x)
            .collect(),
    );
    state.e = e;
    Ok(FedTheLiteStep {
        y: y_l.mix(&y_g, e)?,
        e,
        lambda_s,
        objective_trace: trace,
    })
}
