//! Beta distribution over the external-distribution probability `m`.
//!
//! Densities are evaluated in log space and exponentiated at the end. Every
//! routine that needs `1 - m` accepts it separately so callers working in
//! logit coordinates keep full precision near the endpoints.

use serde::{Deserialize, Serialize};

use super::special::ln_beta;
use crate::error::{BtflError, Result};

/// Shape parameters of `Beta(m; alpha, beta)`.
///
/// `alpha` counts IND events and `beta` counts EXD events on top of the
/// uniform `Beta(1, 1)` start, so both stay `>= 1`. The implicit number of
/// observed events is `(alpha - 1) + (beta - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha < 1.0 || beta < 1.0 {
            return Err(BtflError::Domain(format!(
                "Beta parameters must be finite and >= 1, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `Beta(1, 1)`, the uniform prior.
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn strength(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Number of events absorbed since the uniform start.
    pub fn implicit_count(&self) -> f64 {
        (self.alpha - 1.0) + (self.beta - 1.0)
    }

    pub fn ln_norm(&self) -> f64 {
        ln_beta(self.alpha, self.beta)
    }

    /// Log density given `theta` and `1 - theta` computed independently.
    pub fn ln_pdf_split(&self, theta: f64, one_minus_theta: f64) -> f64 {
        ln_pow(theta, self.alpha - 1.0) + ln_pow(one_minus_theta, self.beta - 1.0) - self.ln_norm()
    }

    /// Density given `theta` and `1 - theta` computed independently.
    pub fn pdf_split(&self, theta: f64, one_minus_theta: f64) -> f64 {
        self.ln_pdf_split(theta, one_minus_theta).exp()
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self::uniform()
    }
}

/// `exponent * ln(x)` with `0 * ln 0 := 0`.
fn ln_pow(x: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * x.ln()
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(BtflError::Domain(format!("{name} must lie in [0, 1], got {x}")))
    }
}

/// `θ^(α−1) (1−θ)^(β−1) / B(α, β)`.
pub fn beta_pdf(theta: f64, prior: &BetaParams) -> Result<f64> {
    check_unit("theta", theta)?;
    Ok(prior.pdf_split(theta, 1.0 - theta))
}

/// Conjugate update after `successes` IND outcomes in `trials` Bernoulli trials.
pub fn beta_update(prior: &BetaParams, successes: u64, trials: u64) -> Result<BetaParams> {
    if successes > trials {
        return Err(BtflError::Domain(format!(
            "successes ({successes}) exceed trials ({trials})"
        )));
    }
    Ok(BetaParams {
        alpha: prior.alpha + successes as f64,
        beta: prior.beta + (trials - successes) as f64,
    })
}

/// Density of `m̂ = m / (m + (1 − m) τ̂)` when `m ~ Beta(α, β)`.
///
/// Inverse map `m = m̂τ̂ / (1 + m̂τ̂ − m̂)` with Jacobian `τ̂ / (1 + m̂τ̂ − m̂)²`.
pub fn transformed_pdf(m_hat: f64, prior: &BetaParams, tau_hat: f64) -> Result<f64> {
    check_unit("m_hat", m_hat)?;
    transformed_pdf_split(m_hat, 1.0 - m_hat, prior, tau_hat)
}

/// [`transformed_pdf`] with `1 − m̂` supplied by the caller.
pub fn transformed_pdf_split(
    m_hat: f64,
    one_minus_m_hat: f64,
    prior: &BetaParams,
    tau_hat: f64,
) -> Result<f64> {
    if !(tau_hat.is_finite() && tau_hat > 0.0) {
        return Err(BtflError::Domain(format!(
            "tau_hat must be finite and positive, got {tau_hat}"
        )));
    }
    let denom = m_hat * tau_hat + one_minus_m_hat;
    let m = m_hat * tau_hat / denom;
    let one_minus_m = one_minus_m_hat / denom;
    let ln_jacobian = tau_hat.ln() - 2.0 * denom.ln();
    Ok((prior.ln_pdf_split(m, one_minus_m) + ln_jacobian).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_density_is_one() {
        for &t in &[0.0, 0.3, 0.5, 1.0] {
            assert_relative_eq!(beta_pdf(t, &BetaParams::uniform()).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn beta_2_3_closed_form() {
        let p = BetaParams::new(2.0, 3.0).unwrap();
        assert_relative_eq!(beta_pdf(0.5, &p).unwrap(), 1.5, epsilon = 1e-12);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let closed = 12.0 * t * (1.0 - t) * (1.0 - t);
            assert_relative_eq!(beta_pdf(t, &p).unwrap(), closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_5_2_against_factorial_table() {
        // B(5,2) = Γ(5)Γ(2)/Γ(7) = 4!·1!/6! = 24/720
        let b = 24.0 / 720.0;
        let expected = 0.9f64.powi(4) * 0.1 / b;
        let p = BetaParams::new(5.0, 2.0).unwrap();
        assert_relative_eq!(beta_pdf(0.9, &p).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 1.96830, epsilon = 1e-10);
    }

    #[test]
    fn endpoints() {
        let p = BetaParams::new(3.0, 1.0).unwrap();
        assert_eq!(beta_pdf(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(beta_pdf(1.0, &p).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let p = BetaParams::uniform();
        assert!(beta_pdf(-0.01, &p).is_err());
        assert!(beta_pdf(1.01, &p).is_err());
        assert!(beta_pdf(f64::NAN, &p).is_err());
        assert!(transformed_pdf(1.5, &p, 2.0).is_err());
        assert!(transformed_pdf(0.5, &p, 0.0).is_err());
        assert!(transformed_pdf(0.5, &p, f64::INFINITY).is_err());
        assert!(BetaParams::new(0.5, 2.0).is_err());
        assert!(BetaParams::new(2.0, f64::NAN).is_err());
    }

    #[test]
    fn update_examples() {
        let u = BetaParams::uniform();
        assert_eq!(beta_update(&u, 1, 1).unwrap(), BetaParams { alpha: 2.0, beta: 1.0 });
        assert_eq!(beta_update(&u, 0, 0).unwrap(), u);
        let p = BetaParams::new(2.0, 3.0).unwrap();
        assert_eq!(beta_update(&p, 4, 10).unwrap(), BetaParams { alpha: 6.0, beta: 9.0 });
        assert!(beta_update(&p, 3, 2).is_err());
    }

    #[test]
    fn transformed_identity_cases() {
        let u = BetaParams::uniform();
        for &m in &[0.0, 0.1, 0.5, 0.77, 1.0] {
            assert_relative_eq!(transformed_pdf(m, &u, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        }
        let p = BetaParams::new(2.0, 3.0).unwrap();
        assert_relative_eq!(transformed_pdf(0.5, &p, 1.0).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn implicit_count() {
        let p = BetaParams::new(4.0, 2.5).unwrap();
        assert_relative_eq!(p.implicit_count(), 4.5);
    }
}
