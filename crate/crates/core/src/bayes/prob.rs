//! Categorical predictions and information measures (natural log, nats).

use serde::{Deserialize, Serialize};

use crate::error::{BtflError, Result};

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

const SUM_TOL: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(BtflError::EmptyInput("probability vector"));
        }
        if entries.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(BtflError::Domain(
                "probability entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(BtflError::Domain(format!(
                "probability entries sum to {sum}, not 1"
            )));
        }
        Ok(Self(entries))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// `weight · other + (1 − weight) · self`.
    pub fn mix(&self, other: &ProbVector, weight: f64) -> Result<ProbVector> {
        if self.len() != other.len() {
            return Err(BtflError::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let w = weight.clamp(0.0, 1.0);
        Ok(ProbVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| w * b + (1.0 - w) * a)
                .collect(),
        ))
    }

    /// Cosine similarity with another vector of the same length.
    pub fn cosine(&self, other: &ProbVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let na: f64 = self.0.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = other.0.iter().map(|b| b * b).sum::<f64>().sqrt();
        dot / (na * nb)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> ProbVector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / total).collect())
}

/// `−Σ pᵢ ln pᵢ` with `0 · ln 0 := 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    -p.0.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

/// `−Σ p_trueᵢ ln p_predᵢ`, with `p_pred` floored at [`PROB_FLOOR`].
pub fn cross_entropy(p_true: &ProbVector, p_pred: &ProbVector) -> f64 {
    -p_true
        .0
        .iter()
        .zip(&p_pred.0)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &q)| t * q.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

/// `Σ pᵢ ln(pᵢ / qᵢ)`, with `q` floored at [`PROB_FLOOR`].
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> f64 {
    p.0.iter()
        .zip(&q.0)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a.max(PROB_FLOOR).ln() - b.max(PROB_FLOOR).ln()))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&ProbVector::one_hot(4, 2)), 0.0);
        assert_abs_diff_eq!(entropy(&ProbVector::uniform(10)), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&ProbVector::uniform(10)), std::f64::consts::LN_10, epsilon = 1e-12);
        let h = entropy(&pv(&[0.5, 0.25, 0.25]));
        assert_abs_diff_eq!(h, 1.5 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(h, 1.039721, epsilon = 1e-6);
    }

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&pv(&[1.0, 0.0]), &pv(&[0.9, 0.1]));
        assert_abs_diff_eq!(ce, -(0.9f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(ce, 0.105361, epsilon = 1e-6);
        let p = pv(&[0.2, 0.3, 0.5]);
        assert_abs_diff_eq!(cross_entropy(&p, &p), entropy(&p), epsilon = 1e-12);
        assert_abs_diff_eq!(kl_divergence(&p, &p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_clamps_zero_predictions() {
        let ce = cross_entropy(&pv(&[0.0, 1.0]), &pv(&[1.0, 0.0]));
        assert_abs_diff_eq!(ce, -(PROB_FLOOR.ln()), epsilon = 1e-9);
        assert!(ce.is_finite());
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.0, 0.0, 0.0]);
        for &x in s.as_slice() {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
        for &c in &[-50.0, 0.0, 3.7, 400.0] {
            let s = softmax(&[c, c + 3f64.ln()]);
            assert_abs_diff_eq!(s[0], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(s[1], 0.75, epsilon = 1e-12);
        }
        let s = softmax(&[1000.0, 0.0]);
        assert_eq!(s.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn validation() {
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(pv(&[0.4, 0.4, 0.2]).argmax(), 0);
        assert_eq!(pv(&[0.1, 0.2, 0.7]).argmax(), 2);
    }

    #[test]
    fn mix_endpoints() {
        let a = pv(&[0.7, 0.2, 0.1]);
        let b = pv(&[0.1, 0.2, 0.7]);
        assert_eq!(a.mix(&b, 0.0).unwrap(), a);
        assert_eq!(a.mix(&b, 1.0).unwrap(), b);
        let mid = a.mix(&b, 0.5).unwrap();
        assert_abs_diff_eq!(mid[0], 0.4, epsilon = 1e-15);
        assert!(a.mix(&ProbVector::uniform(2), 0.5).is_err());
    }
}
