//! Dirichlet label heterogeneity across clients.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::bayes::ProbVector;
use crate::error::{BtflError, Result};
use crate::rng::SeedStream;

/// `n_clients` independent draws from a symmetric `Dirichlet(concentration · 1_K)`.
///
/// Gamma variates are drawn in log space (`G(a) = G(a + 1) · U^{1/a}`) so tiny
/// concentrations never underflow to an all-zero vector.
pub fn dirichlet_partition(
    k: usize,
    n_clients: usize,
    concentration: f64,
    seed: u64,
) -> Result<Vec<ProbVector>> {
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(BtflError::config(
            "concentration",
            format!("must be finite and > 0, got {concentration}"),
        ));
    }
    if k == 0 {
        return Err(BtflError::EmptyInput("class count"));
    }
    let gamma = Gamma::new(concentration + 1.0, 1.0)
        .map_err(|e| BtflError::Domain(format!("gamma distribution: {e}")))?;
    let mut rng = SeedStream::new(seed).named("dirichlet").rng();
    let mut out = Vec::with_capacity(n_clients);
    for _ in 0..n_clients {
        let logs: Vec<f64> = (0..k)
            .map(|_| {
                let g: f64 = gamma.sample(&mut rng);
                let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
                g.ln() + u.ln() / concentration
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        out.push(ProbVector::new(w.into_iter().map(|x| x / total).collect())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_concentration_is_near_uniform() {
        let parts = dirichlet_partition(10, 8, 1e6, 3).unwrap();
        for p in &parts {
            for &x in p.as_slice() {
                assert!((x - 0.1).abs() < 0.01, "{x}");
            }
        }
    }

    #[test]
    fn small_concentration_is_peaked() {
        let parts = dirichlet_partition(10, 10, 0.1, 0).unwrap();
        let peaked = parts
            .iter()
            .filter(|p| p.as_slice().iter().copied().fold(0.0, f64::max) > 0.5)
            .count();
        assert!(peaked >= 7, "only {peaked} peaked clients");
        for p in &parts {
            let s: f64 = p.as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            dirichlet_partition(5, 4, 0.5, 9).unwrap(),
            dirichlet_partition(5, 4, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn rejects_zero_concentration() {
        let err = dirichlet_partition(5, 4, 0.0, 9).unwrap_err();
        assert!(err.to_string().contains("concentration"));
    }

    #[test]
    fn extreme_concentration_never_degenerates() {
        let parts = dirichlet_partition(10, 50, 1e-3, 1).unwrap();
        assert_eq!(parts.len(), 50);
    }
}
