//! Binary feature quantization and discretized-likelihood estimators (DLEs).
//!
//! A feature `z ≥ 0` is mapped to `ẑ = Round(tanh z) ∈ {0, 1}ᵈ`. A DLE keeps,
//! per dimension, the Laplace-smoothed frequency `pᵢ` of the bit being 0 and
//! scores a quantized feature by the independent-Bernoulli log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{BtflError, Result};

/// Smallest `f64` with `tanh(z) ≥ 1/2`, i.e. the rounding boundary of
/// `Round(tanh z)` under round-half-away-from-zero.
pub const FSQ_THRESHOLD: f64 = 0.549_306_144_334_054_9;

/// Post-relu extractor output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(BtflError::Domain(
                "feature entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self(entries))
    }

    /// Applies relu to arbitrary finite pre-activations.
    pub fn from_preactivation(pre: Vec<f64>) -> Self {
        Self(pre.into_iter().map(|x| x.max(0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Binary code `ẑ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantizedFeature(Vec<u8>);

impl QuantizedFeature {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(BtflError::Domain("quantized bits must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

/// `Round(tanh z)` per dimension.
pub fn fsq(z: &FeatureVector) -> QuantizedFeature {
    QuantizedFeature(z.0.iter().map(|&x| u8::from(x >= FSQ_THRESHOLD)).collect())
}

/// Per-dimension Bernoulli model of quantized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DleModel {
    /// Smoothed probability that bit `i` is 0, strictly inside (0, 1).
    pub p: Vec<f64>,
    pub n_fit: usize,
}

impl DleModel {
    pub fn new(p: Vec<f64>, n_fit: usize) -> Result<Self> {
        if p.is_empty() {
            return Err(BtflError::EmptyInput("DLE probabilities"));
        }
        if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(BtflError::Domain(
                "DLE probabilities must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(Self { p, n_fit })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }
}

/// Laplace-smoothed zero frequencies: `pᵢ = (zerosᵢ + 1) / (N + 2)`.
pub fn fit_dle<'a, I>(samples: I) -> Result<DleModel>
where
    I: IntoIterator<Item = &'a QuantizedFeature>,
{
    let mut iter = samples.into_iter();
    let first = iter.next().ok_or(BtflError::EmptyInput("DLE training samples"))?;
    let d = first.dim();
    if d == 0 {
        return Err(BtflError::EmptyInput("quantized feature dimension"));
    }
    let mut zeros = vec![0usize; d];
    let mut n = 0usize;
    for sample in std::iter::once(first).chain(iter) {
        if sample.dim() != d {
            return Err(BtflError::DimensionMismatch {
                expected: d,
                actual: sample.dim(),
            });
        }
        for (count, &bit) in zeros.iter_mut().zip(sample.bits()) {
            if bit == 0 {
                *count += 1;
            }
        }
        n += 1;
    }
    let denom = (n + 2) as f64;
    Ok(DleModel {
        p: zeros.iter().map(|&c| (c + 1) as f64 / denom).collect(),
        n_fit: n,
    })
}

/// `Σᵢ [ẑᵢ = 0] ln pᵢ + [ẑᵢ = 1] ln(1 − pᵢ)`.
pub fn log_likelihood(model: &DleModel, z_hat: &QuantizedFeature) -> Result<f64> {
    if model.dim() != z_hat.dim() {
        return Err(BtflError::DimensionMismatch {
            expected: model.dim(),
            actual: z_hat.dim(),
        });
    }
    Ok(model
        .p
        .iter()
        .zip(z_hat.bits())
        .map(|(&p, &bit)| if bit == 0 { p.ln() } else { (1.0 - p).ln() })
        .sum())
}

/// Server-side aggregation: unweighted elementwise mean of client DLEs.
pub fn aggregate_dles(models: &[DleModel]) -> Result<DleModel> {
    let first = models.first().ok_or(BtflError::EmptyInput("DLE models"))?;
    let d = first.dim();
    let mut sum = vec![0.0; d];
    let mut n_fit = 0;
    for m in models {
        if m.dim() != d {
            return Err(BtflError::DimensionMismatch {
                expected: d,
                actual: m.dim(),
            });
        }
        for (s, &p) in sum.iter_mut().zip(&m.p) {
            *s += p;
        }
        n_fit += m.n_fit;
    }
    let k = models.len() as f64;
    Ok(DleModel {
        p: sum.into_iter().map(|s| s / k).collect(),
        n_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn q(v: &[u8]) -> QuantizedFeature {
        QuantizedFeature::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fsq_examples() {
        assert_eq!(fsq(&fv(&[0.0, 0.0, 0.0])).bits(), &[0, 0, 0]);
        assert_eq!(fsq(&fv(&[1.0])).bits(), &[1]);
        assert_eq!(fsq(&fv(&[FSQ_THRESHOLD])).bits(), &[1]);
        // Six-digit rounding of atanh(1/2) lands just below the boundary.
        assert_eq!(fsq(&fv(&[0.549306])).bits(), &[0]);
        assert_eq!(fsq(&fv(&[0.549307])).bits(), &[1]);
    }

    #[test]
    fn fsq_threshold_matches_tanh_rounding() {
        let below = f64::from_bits(FSQ_THRESHOLD.to_bits() - 1);
        assert!(below.tanh() < 0.5);
        assert!(FSQ_THRESHOLD.tanh() >= 0.5);
        for i in 0..2000 {
            let z = i as f64 * 0.003;
            if (z - FSQ_THRESHOLD).abs() < 1e-12 {
                continue;
            }
            let by_tanh = z.tanh().round() as u8;
            assert_eq!(fsq(&fv(&[z])).bits()[0], by_tanh, "z={z}");
        }
    }

    #[test]
    fn rejects_negative_features() {
        assert!(FeatureVector::new(vec![0.1, -0.2]).is_err());
        assert_eq!(
            FeatureVector::from_preactivation(vec![0.3, -2.0]).as_slice(),
            &[0.3, 0.0]
        );
        assert!(QuantizedFeature::new(vec![0, 2]).is_err());
    }

    #[test]
    fn fit_examples() {
        let m = fit_dle(&[q(&[0]), q(&[0])]).unwrap();
        assert_abs_diff_eq!(m.p[0], 0.75);
        assert_eq!(m.n_fit, 2);
        let m = fit_dle(&[q(&[0, 1])]).unwrap();
        assert_abs_diff_eq!(m.p[0], 2.0 / 3.0);
        assert_abs_diff_eq!(m.p[1], 1.0 / 3.0);
    }

    #[test]
    fn fit_errors() {
        let empty: Vec<QuantizedFeature> = vec![];
        assert!(matches!(fit_dle(&empty), Err(BtflError::EmptyInput(_))));
        assert!(matches!(
            fit_dle(&[q(&[0, 1]), q(&[1])]),
            Err(BtflError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_columns_stay_interior() {
        let samples: Vec<_> = (0..500).map(|_| q(&[0, 1])).collect();
        let m = fit_dle(&samples).unwrap();
        assert!(m.p.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn log_likelihood_examples() {
        let m = DleModel::new(vec![0.5, 0.5], 1).unwrap();
        for bits in [[0, 0], [0, 1], [1, 1]] {
            assert_abs_diff_eq!(log_likelihood(&m, &q(&bits)).unwrap(), 0.25f64.ln(), epsilon = 1e-15);
        }
        let m = DleModel::new(vec![0.9, 0.1], 1).unwrap();
        assert_abs_diff_eq!(log_likelihood(&m, &q(&[0, 1])).unwrap(), 0.81f64.ln(), epsilon = 1e-14);
        assert!(log_likelihood(&m, &q(&[0])).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let a = DleModel::new(vec![0.2], 3).unwrap();
        let b = DleModel::new(vec![0.8], 5).unwrap();
        assert_eq!(aggregate_dles(std::slice::from_ref(&a)).unwrap(), a);
        let avg = aggregate_dles(&[a.clone(), b]).unwrap();
        assert_abs_diff_eq!(avg.p[0], 0.5);
        assert_eq!(avg.n_fit, 8);
        let same = aggregate_dles(&vec![a.clone(); 10]).unwrap();
        assert_abs_diff_eq!(same.p[0], 0.2, epsilon = 1e-15);
        assert!(aggregate_dles(&[]).is_err());
        assert!(aggregate_dles(&[a, DleModel::new(vec![0.5, 0.5], 1).unwrap()]).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(DleModel::new(vec![0.0, 0.5], 1).is_err());
        assert!(DleModel::new(vec![1.0], 1).is_err());
        assert!(DleModel::new(vec![], 0).is_err());
    }
}
