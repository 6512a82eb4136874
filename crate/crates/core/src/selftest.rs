//! Property battery behind the `selftest` command. Failures are reported
//! as verdicts, never raised.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::adapter::{hbu_update, AdapterConfig, BtflAdapter, EntropyBaselines, Event, HbuState};
use crate::bayes::{
    beta_pdf, beta_update, cross_entropy, entropy, expected_interpolation_coefficient, integrate_unit_logit,
    mc_oracle_estimate, transformed_pdf_mass, BetaParams, ProbVector, QuadratureConfig,
};
use crate::dle::{DleModel, FeatureVector};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: &'static str, passed: bool, detail: String) -> Verdict {
    Verdict { name, passed, detail }
}

fn random_prior(rng: &mut ChaCha8Rng) -> BetaParams {
    BetaParams::new(rng.random_range(1.0..12.0), rng.random_range(1.0..12.0)).expect("valid range")
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> ProbVector {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    ProbVector::new(w.into_iter().map(|x| x / s).collect()).expect("normalized")
}

fn conjugacy(rng: &mut ChaCha8Rng) -> Verdict {
    let cfg = QuadratureConfig {
        panels: 256,
        abs_tol: 1e-12,
    };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let prior = random_prior(rng);
        let n = rng.random_range(0..30u64);
        let k = rng.random_range(0..=n);
        let unnorm = |x: f64, y: f64| prior.pdf_split(x, y) * x.powi(k as i32) * y.powi((n - k) as i32);
        let z = match integrate_unit_logit(unnorm, 0.0, 60.0, &cfg) {
            Ok(z) => z,
            Err(e) => return verdict("conjugacy", false, e.to_string()),
        };
        let post = beta_update(&prior, k, n).expect("k <= n");
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let err = (unnorm(t, 1.0 - t) / z - beta_pdf(t, &post).expect("in range")).abs();
            worst = worst.max(err);
        }
    }
    verdict("conjugacy", worst < 1e-6, format!("max pointwise error {worst:.2e}"))
}

fn normalization(rng: &mut ChaCha8Rng) -> Verdict {
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let prior = random_prior(rng);
        let tau = rng.random_range(-8.0..8.0f64).exp();
        match transformed_pdf_mass(&prior, tau, &cfg) {
            Ok(m) => worst = worst.max((m - 1.0).abs()),
            Err(e) => return verdict("normalization", false, e.to_string()),
        }
    }
    verdict("normalization", worst < 1e-6, format!("max |mass - 1| {worst:.2e}"))
}

fn quadrature_vs_mc(rng: &mut ChaCha8Rng) -> Verdict {
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for i in 0..10 {
        let prior = random_prior(rng);
        let tau = rng.random_range(-3.0..3.0f64).exp();
        let q = match expected_interpolation_coefficient(&prior, tau, &cfg) {
            Ok(q) => q,
            Err(e) => return verdict("quadrature_vs_mc", false, e.to_string()),
        };
        let mc = mc_oracle_estimate(&prior, tau, 200_000, 1000 + i);
        worst = worst.max((q - mc.mean).abs());
    }
    verdict("quadrature_vs_mc", worst < 5e-3, format!("max |quad - mc| {worst:.2e}"))
}

fn entropy_bound(rng: &mut ChaCha8Rng) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..12);
        let p = random_simplex(rng, k);
        let q = random_simplex(rng, k);
        worst = worst.max(entropy(&p) - cross_entropy(&p, &q));
    }
    verdict("entropy_bound", worst <= 1e-9, format!("max H(p) - CE(p, q) = {worst:.2e}"))
}

fn monotonicity(rng: &mut ChaCha8Rng) -> Verdict {
    let cfg = QuadratureConfig::default();
    for _ in 0..20 {
        let prior = random_prior(rng);
        let mut prev = f64::INFINITY;
        for j in -20..=20 {
            let tau = (j as f64 * 0.5).exp();
            let e = match expected_interpolation_coefficient(&prior, tau, &cfg) {
                Ok(e) => e,
                Err(err) => return verdict("monotonicity", false, err.to_string()),
            };
            if e > prev + 1e-12 {
                return verdict(
                    "monotonicity",
                    false,
                    format!("e rose from {prev} to {e} at tau {tau} for {prior:?}"),
                );
            }
            prev = e;
        }
    }
    verdict("monotonicity", true, "e non-increasing in tau".into())
}

fn pruning_invariant(rng: &mut ChaCha8Rng) -> Verdict {
    if HbuState::fresh(2.5).is_ok() {
        return verdict("pruning_invariant", false, "lambda < 3 was accepted".into());
    }
    let mut s = HbuState::fresh(16.0).expect("valid lambda");
    for step in 0..10_000 {
        let ev = match rng.random_range(0..3) {
            0 => Event::Ind,
            1 => Event::Exd,
            _ => Event::None,
        };
        s = hbu_update(&s, ev);
        let p = s.prior;
        if !(p.alpha >= 1.0 && p.beta >= 1.0 && p.alpha + p.beta <= 16.0) {
            return verdict("pruning_invariant", false, format!("step {step}: {p:?}"));
        }
    }
    let pruned = hbu_update(
        &HbuState::new(BetaParams { alpha: 12.0, beta: 5.0 }, 16.0).expect("valid"),
        Event::Exd,
    );
    let ok = pruned.prior == BetaParams { alpha: 5.0 / 3.0, beta: 4.0 / 3.0 };
    verdict("pruning_invariant", ok, format!("10000 random events, final {:?}", s.prior))
}

fn batch_invariance(rng: &mut ChaCha8Rng) -> Verdict {
    let d = 16;
    let k = 5;
    let local = DleModel::new((0..d).map(|_| rng.random_range(0.05..0.95)).collect(), 100).expect("valid");
    let global = DleModel::new((0..d).map(|_| rng.random_range(0.05..0.95)).collect(), 100).expect("valid");
    let samples: Vec<(FeatureVector, Vec<f64>, Vec<f64>)> = (0..200)
        .map(|_| {
            let z = FeatureVector::new((0..d).map(|_| rng.random_range(0.0..1.5)).collect()).expect("valid");
            let l = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            (z, l, g)
        })
        .collect();
    let run = |chunk: usize| {
        let mut a = BtflAdapter::new(
            local.clone(),
            global.clone(),
            EntropyBaselines::new(0.6, 1.1),
            AdapterConfig::default(),
        )
        .expect("valid adapter");
        let mut out = Vec::new();
        for c in samples.chunks(chunk) {
            out.extend(a.adapt_batch(c.iter().map(|(z, l, g)| (z, l.as_slice(), g.as_slice())))?);
        }
        crate::Result::Ok(out)
    };
    match (run(1), run(32)) {
        (Ok(a), Ok(b)) => verdict(
            "batch_invariance",
            a == b,
            format!("{} outputs, chunk 1 vs 32 identical: {}", a.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => verdict("batch_invariance", false, e.to_string()),
    }
}

type Check = fn(&mut ChaCha8Rng) -> Verdict;

/// Runs every property with RNG streams derived from `seed`.
pub fn run_selftest(seed: u64) -> Vec<Verdict> {
    let s = SeedStream::new(seed).named("selftest");
    let checks: [(&str, Check); 7] = [
        ("conjugacy", conjugacy),
        ("normalization", normalization),
        ("quadrature_vs_mc", quadrature_vs_mc),
        ("entropy_bound", entropy_bound),
        ("monotonicity", monotonicity),
        ("pruning_invariant", pruning_invariant),
        ("batch_invariance", batch_invariance),
    ];
    checks
        .iter()
        .map(|(name, f)| f(&mut s.named(name).rng()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_properties_pass() {
        for v in run_selftest(0) {
            assert!(v.passed, "{}: {}", v.name, v.detail);
        }
    }
}
