//! Per-client online adaptation.
//!
//! Each test sample passes through three stages:
//!
//! 1. Information extraction: both heads' softmax outputs `Y_l`, `Y_g`, their
//!    entropies `H_l`, `H_g`, and the local/global DLE log-likelihoods of the
//!    quantized feature.
//! 2. Information analysis: the historical update (HBU) detects an IND/EXD
//!    event and moves the Beta prior over `m`; the characteristic update (CBU)
//!    forms the entropy-rectified likelihood ratio `τ̂`.
//! 3. Interpolation: `e = E[m̂]` under the transformed posterior and
//!    `Y_int = e·Y_g + (1 − e)·Y_l`.
//!
//! Only the HBU prior carries state between samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::{
    entropy, expected_interpolation_coefficient, softmax, BetaParams, ProbVector, QuadratureConfig,
};
use crate::dle::{fsq, log_likelihood, DleModel, FeatureVector, QuantizedFeature};
use crate::error::{BtflError, Result};

/// Floor for the training-set entropy baselines.
pub const ENTROPY_FLOOR: f64 = 1e-6;

/// `ln τ̂` is clamped to `[-LOG_TAU_CLAMP, LOG_TAU_CLAMP]`.
pub const LOG_TAU_CLAMP: f64 = 50.0;

pub const DEFAULT_LAMBDA: f64 = 16.0;

/// Average prediction entropy of each head over the local training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBaselines {
    pub h_bar_l: f64,
    pub h_bar_g: f64,
}

impl EntropyBaselines {
    /// Clamps both baselines to at least [`ENTROPY_FLOOR`].
    pub fn new(h_bar_l: f64, h_bar_g: f64) -> Self {
        Self {
            h_bar_l: h_bar_l.max(ENTROPY_FLOOR),
            h_bar_g: h_bar_g.max(ENTROPY_FLOOR),
        }
    }
}

/// Per-sample test information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestInformation {
    pub log_q_l: f64,
    pub log_q_g: f64,
    pub h_l: f64,
    pub h_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    #[serde(rename = "IND")]
    Ind,
    #[serde(rename = "EXD")]
    Exd,
    None,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::Ind => "IND",
            Event::Exd => "EXD",
            Event::None => "None",
        })
    }
}

impl FromStr for Event {
    type Err = BtflError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "IND" => Ok(Event::Ind),
            "EXD" => Ok(Event::Exd),
            "None" => Ok(Event::None),
            other => Err(BtflError::Parse(format!("unknown event `{other}`"))),
        }
    }
}

/// Historical prior over `m` plus its pruning threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbuState {
    /// Pseudo-counts: `alpha` for IND events, `beta` for EXD events.
    pub prior: BetaParams,
    pub lambda: f64,
}

impl HbuState {
    pub fn new(prior: BetaParams, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 3.0) {
            return Err(BtflError::config("lambda", format!("must be >= 3, got {lambda}")));
        }
        Ok(Self { prior, lambda })
    }

    /// Uniform prior with pruning threshold `lambda`.
    pub fn fresh(lambda: f64) -> Result<Self> {
        Self::new(BetaParams::uniform(), lambda)
    }

    /// Prior over `m = P(EXD)`. `alpha` counts IND events and `beta` EXD
    /// events, so `m ~ Beta(beta, alpha)`.
    pub fn exd_prior(&self) -> BetaParams {
        BetaParams {
            alpha: self.prior.beta,
            beta: self.prior.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterOutput {
    pub y_int: ProbVector,
    /// Weight on the global head.
    pub e: f64,
    pub event: Event,
    pub tau_hat: f64,
    /// Prior after this sample's historical update.
    pub prior: BetaParams,
}

pub fn compute_test_info(
    local_dle: &DleModel,
    global_dle: &DleModel,
    z_hat: &QuantizedFeature,
    y_l: &ProbVector,
    y_g: &ProbVector,
) -> Result<TestInformation> {
    Ok(TestInformation {
        log_q_l: log_likelihood(local_dle, z_hat)?,
        log_q_g: log_likelihood(global_dle, z_hat)?,
        h_l: entropy(y_l),
        h_g: entropy(y_g),
    })
}

/// Event detection: the likelihood ratio proposes IND or EXD and the entropy
/// test against the training baselines accepts or rejects it.
pub fn hbu_detect(ti: &TestInformation, baselines: &EntropyBaselines) -> Event {
    let delta = ti.log_q_l - ti.log_q_g;
    let local_confident = ti.h_l < baselines.h_bar_l;
    let global_confident = ti.h_g < baselines.h_bar_g;
    let local_unsure = ti.h_l > baselines.h_bar_l;
    let global_unsure = ti.h_g > baselines.h_bar_g;
    if delta > 0.0 && local_confident && global_unsure {
        Event::Ind
    } else if delta < 0.0 && local_unsure && global_confident {
        Event::Exd
    } else {
        Event::None
    }
}

/// Count the event, then prune the prior strength back under `λ`.
pub fn hbu_update(state: &HbuState, event: Event) -> HbuState {
    let BetaParams { mut alpha, mut beta } = state.prior;
    match event {
        Event::Ind => alpha += 1.0,
        Event::Exd => beta += 1.0,
        Event::None => {}
    }
    let total = alpha + beta;
    if total > state.lambda {
        // `1 + α/total` with a single rounding.
        alpha = (total + alpha) / total;
        beta = (total + beta) / total;
    }
    HbuState {
        prior: BetaParams { alpha, beta },
        lambda: state.lambda,
    }
}

/// Entropy-rectified, dimension-normalized likelihood ratio `τ̂`.
///
/// `ln τ̂ = u_l · ln Q_l / d − u_g · ln Q_g / d` with
/// `u = exp((H − H̄) / H̄)` per head, clamped to `±LOG_TAU_CLAMP`.
pub fn cbu_tau_hat(ti: &TestInformation, baselines: &EntropyBaselines, d: usize) -> f64 {
    cbu_log_tau_hat(ti, baselines, d).exp()
}

/// Clamped `ln τ̂`.
pub fn cbu_log_tau_hat(ti: &TestInformation, baselines: &EntropyBaselines, d: usize) -> f64 {
    let h_bar_l = baselines.h_bar_l.max(ENTROPY_FLOOR);
    let h_bar_g = baselines.h_bar_g.max(ENTROPY_FLOOR);
    let u_l = ((ti.h_l - h_bar_l) / h_bar_l).exp();
    let u_g = ((ti.h_g - h_bar_g) / h_bar_g).exp();
    let d = d as f64;
    let log_tau = u_l * (ti.log_q_l / d) - u_g * (ti.log_q_g / d);
    if log_tau.is_nan() {
        return 0.0;
    }
    log_tau.clamp(-LOG_TAU_CLAMP, LOG_TAU_CLAMP)
}

/// Interpolate the two heads with `e = E[m̂]`. Returns `(Y_int, e)`.
pub fn dpi(
    y_l: &ProbVector,
    y_g: &ProbVector,
    prior: &BetaParams,
    tau_hat: f64,
    cfg: &QuadratureConfig,
) -> Result<(ProbVector, f64)> {
    if y_l.len() != y_g.len() {
        return Err(BtflError::DimensionMismatch {
            expected: y_l.len(),
            actual: y_g.len(),
        });
    }
    let e = expected_interpolation_coefficient(prior, tau_hat, cfg)?;
    Ok((y_l.mix(y_g, e)?, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub lambda: f64,
    pub quadrature: QuadratureConfig,
    /// With the historical update disabled the prior stays at `Beta(1, 1)`.
    pub hbu_enabled: bool,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            quadrature: QuadratureConfig::default(),
            hbu_enabled: true,
        }
    }
}

/// One client's adaptation state machine. Calls must be serialized per
/// instance since stream order drives the prior.
#[derive(Debug, Clone)]
pub struct BtflAdapter {
    local_dle: DleModel,
    global_dle: DleModel,
    baselines: EntropyBaselines,
    hbu: HbuState,
    config: AdapterConfig,
}

impl BtflAdapter {
    pub fn new(
        local_dle: DleModel,
        global_dle: DleModel,
        baselines: EntropyBaselines,
        config: AdapterConfig,
    ) -> Result<Self> {
        if local_dle.dim() != global_dle.dim() {
            return Err(BtflError::DimensionMismatch {
                expected: local_dle.dim(),
                actual: global_dle.dim(),
            });
        }
        config.quadrature.validate()?;
        Ok(Self {
            local_dle,
            global_dle,
            baselines: EntropyBaselines::new(baselines.h_bar_l, baselines.h_bar_g),
            hbu: HbuState::fresh(config.lambda)?,
            config,
        })
    }

    pub fn hbu_state(&self) -> &HbuState {
        &self.hbu
    }

    pub fn baselines(&self) -> &EntropyBaselines {
        &self.baselines
    }

    /// Back to the uniform prior.
    pub fn reset(&mut self) {
        self.hbu.prior = BetaParams::uniform();
    }

    pub fn adapt(
        &mut self,
        z: &FeatureVector,
        logits_l: &[f64],
        logits_g: &[f64],
    ) -> Result<AdapterOutput> {
        if logits_l.len() != logits_g.len() {
            return Err(BtflError::DimensionMismatch {
                expected: logits_l.len(),
                actual: logits_g.len(),
            });
        }
        let y_l = softmax(logits_l);
        let y_g = softmax(logits_g);
        let z_hat = fsq(z);
        let ti = compute_test_info(&self.local_dle, &self.global_dle, &z_hat, &y_l, &y_g)?;

        let event = hbu_detect(&ti, &self.baselines);
        let next = if self.config.hbu_enabled {
            hbu_update(&self.hbu, event)
        } else {
            self.hbu
        };

        let tau_hat = cbu_tau_hat(&ti, &self.baselines, z_hat.dim());
        let (y_int, e) = dpi(&y_l, &y_g, &next.exd_prior(), tau_hat, &self.config.quadrature)?;

        self.hbu = next;
        Ok(AdapterOutput {
            y_int,
            e,
            event,
            tau_hat,
            prior: next.prior,
        })
    }

    /// Adapts a chunk of samples in order. Equivalent to calling [`adapt`]
    /// on each; the chunking has no effect on the outputs.
    ///
    /// [`adapt`]: BtflAdapter::adapt
    pub fn adapt_batch<'a, I>(&mut self, batch: I) -> Result<Vec<AdapterOutput>>
    where
        I: IntoIterator<Item = (&'a FeatureVector, &'a [f64], &'a [f64])>,
    {
        batch
            .into_iter()
            .map(|(z, l, g)| self.adapt(z, l, g))
            .collect()
    }
}
