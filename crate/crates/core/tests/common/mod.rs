//! Test-side numerical oracles, independent of the library's quadrature.

/// `(σ(t), 1 − σ(t))` without cancellation.
pub fn logistic(t: f64) -> (f64, f64) {
    if t >= 0.0 {
        let e = (-t).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = t.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// `ln ∫₀¹ exp(log_f(θ, 1 − θ)) dθ` by the trapezoid rule in `t = logit θ`
/// over `[-60, 60]`. The integrand decays exponentially in `t`, where the
/// trapezoid rule converges geometrically.
pub fn ln_integral_logit(log_f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 0.01;
    let n = 12_000;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let (x, y) = logistic(-60.0 + i as f64 * h);
            log_f(x, y) + x.ln() + y.ln()
        })
        .collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = vals.iter().map(|v| (v - m).exp()).sum();
    m + (s * h).ln()
}
