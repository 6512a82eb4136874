//! Composite Simpson integration with panel doubling, and the expected
//! interpolation coefficient built on it.
//!
//! Integrals over the unit interval are taken in logit coordinates,
//! `x = σ(t)`, `dx = σ(t)σ(−t) dt`. A Beta density with `α, β ≥ 1` becomes a
//! smooth bump with exponentially decaying tails, and the boundary layers of
//! `m / (m + (1 − m)τ̂)` at extreme `τ̂` turn into a plain logistic shift.

use serde::{Deserialize, Serialize};

use super::beta::{transformed_pdf_split, BetaParams};
use crate::error::{BtflError, Result};

/// Panel budget for the doubling loop.
const MAX_PANELS: usize = 1 << 22;

/// Half-width of the logit window beyond the Beta mode shift. Tail mass
/// outside is below `e^-40 / B(α, β)` for `α, β ≥ 1`.
const LOGIT_HALF_WIDTH: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Starting panel count (even, >= 16).
    pub panels: usize,
    /// Stop when successive doublings differ by less than this.
    pub abs_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: 256,
            abs_tol: 1e-8,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 16 || !self.panels.is_multiple_of(2) {
            return Err(BtflError::config(
                "quad_panels",
                format!("must be an even integer >= 16, got {}", self.panels),
            ));
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(BtflError::config(
                "quad_tol",
                format!("must be positive, got {}", self.abs_tol),
            ));
        }
        Ok(())
    }
}

/// Composite Simpson on `[a, b]`, doubling the panel count until two
/// successive estimates agree within `cfg.abs_tol`.
pub fn simpson<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    let mut n = cfg.panels;
    let mut h = (b - a) / n as f64;
    let ends = f(a) + f(b);
    // Simpson = h/3 (ends + 4·odd + 2·even); on doubling the old odd and even
    // nodes all become even nodes.
    let mut even = (1..n / 2).map(|i| f(a + (2 * i) as f64 * h)).sum::<f64>();
    let mut odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum::<f64>();
    let mut estimate = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    loop {
        if n >= MAX_PANELS {
            return Err(BtflError::Integration {
                last_diff: f64::NAN,
                panels: n,
                abs_tol: cfg.abs_tol,
            });
        }
        n *= 2;
        h *= 0.5;
        even += odd;
        odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum::<f64>();
        let refined = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let diff = (refined - estimate).abs();
        if !refined.is_finite() {
            return Err(BtflError::Integration {
                last_diff: diff,
                panels: n,
                abs_tol: cfg.abs_tol,
            });
        }
        if diff < cfg.abs_tol {
            return Ok(refined);
        }
        if n >= MAX_PANELS {
            return Err(BtflError::Integration {
                last_diff: diff,
                panels: n,
                abs_tol: cfg.abs_tol,
            });
        }
        estimate = refined;
    }
}

/// Logistic function split into `(σ(t), σ(−t))`, both to full relative precision.
#[inline]
pub fn logistic_pair(t: f64) -> (f64, f64) {
    if t >= 0.0 {
        let e = (-t).exp();
        let s = 1.0 / (1.0 + e);
        (s, e * s)
    } else {
        let e = t.exp();
        let s = 1.0 / (1.0 + e);
        (e * s, s)
    }
}

/// `∫₀¹ f(x) dx` evaluated as `∫ f(σ(t)) σ(t)σ(−t) dt` over
/// `[center − half_width, center + half_width]`.
///
/// `f` receives `(x, 1 − x)` with both computed from `t`.
pub fn integrate_unit_logit<F>(
    f: F,
    center: f64,
    half_width: f64,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    simpson(
        |t| {
            let (x, one_minus_x) = logistic_pair(t);
            let w = x * one_minus_x;
            if w == 0.0 {
                0.0
            } else {
                f(x, one_minus_x) * w
            }
        },
        center - half_width,
        center + half_width,
        cfg,
    )
}

/// Logit window center for a Beta density: its mode in logit space.
fn beta_logit_center(prior: &BetaParams) -> f64 {
    (prior.alpha / prior.beta).ln()
}

/// `e = E[m̂]` where `m̂ = m / (m + (1 − m) τ̂)` and `m ~ Beta(α, β)`.
///
/// Integrated over the pre-transform variable `m`, which equals integrating
/// `m̂` against the transformed density. Clamped to `[0, 1]`.
pub fn expected_interpolation_coefficient(
    prior: &BetaParams,
    tau_hat: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(tau_hat.is_finite() && tau_hat > 0.0) {
        return Err(BtflError::Domain(format!(
            "tau_hat must be finite and positive, got {tau_hat}"
        )));
    }
    let ln_norm = prior.ln_norm();
    let (a1, b1) = (prior.alpha - 1.0, prior.beta - 1.0);
    let ln_tau = tau_hat.ln();
    let e = simpson(
        |t| {
            let (m, one_minus_m) = logistic_pair(t);
            // Beta density times the logit Jacobian m(1 − m).
            let ln_w = a1 * m.ln() + b1 * one_minus_m.ln() - ln_norm + m.ln() + one_minus_m.ln();
            // m / (m + (1 − m) τ̂) = σ(t − ln τ̂)
            let (m_hat, _) = logistic_pair(t - ln_tau);
            if ln_w == f64::NEG_INFINITY {
                0.0
            } else {
                m_hat * ln_w.exp()
            }
        },
        beta_logit_center(prior) - LOGIT_HALF_WIDTH,
        beta_logit_center(prior) + LOGIT_HALF_WIDTH,
        cfg,
    )?;
    Ok(e.clamp(0.0, 1.0))
}

/// `∫₀¹ transformed_pdf(m̂) dm̂`, integrated in the `m̂` coordinate.
///
/// Equals one for every valid `(prior, τ̂)`; used as a consistency check of
/// the change-of-variables density.
pub fn transformed_pdf_mass(prior: &BetaParams, tau_hat: f64, cfg: &QuadratureConfig) -> Result<f64> {
    // logit(m̂) = logit(m) − ln τ̂, so the mass sits around the shifted mode.
    let center = beta_logit_center(prior) - tau_hat.ln();
    let prior = *prior;
    integrate_unit_logit(
        move |m_hat, one_minus| transformed_pdf_split(m_hat, one_minus, &prior, tau_hat).unwrap_or(f64::NAN),
        center,
        LOGIT_HALF_WIDTH,
        cfg,
    )
}
