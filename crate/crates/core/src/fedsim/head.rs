//! Linear softmax classification head `logits = W z + b`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::softmax;
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub n_classes: usize,
    pub dim: usize,
    /// Row-major `n_classes × dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient of the mean cross-entropy with respect to `(W, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadModel {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * dim],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        softmax(&self.logits(z)).argmax()
    }

    /// Mean cross-entropy over `(features, labels)`.
    pub fn loss(&self, features: &[FeatureVector], labels: &[usize]) -> f64 {
        let total: f64 = features
            .iter()
            .zip(labels)
            .map(|(z, &y)| {
                let l = self.logits(z.as_slice());
                let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + l.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                lse - l[y]
            })
            .sum();
        total / features.len() as f64
    }

    pub fn accuracy(&self, features: &[FeatureVector], labels: &[usize]) -> f64 {
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(z, &y)| self.predict(z.as_slice()) == y)
            .count();
        hits as f64 / features.len() as f64
    }

    /// Analytic gradient of the mean cross-entropy over the given indices:
    /// `∂/∂W_k = mean((p_k − [y = k]) z)`, `∂/∂b_k = mean(p_k − [y = k])`.
    pub fn gradient(&self, features: &[FeatureVector], labels: &[usize], idx: &[usize]) -> HeadGradient {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.n_classes];
        for &i in idx {
            let z = features[i].as_slice();
            let p = softmax(&self.logits(z));
            for k in 0..self.n_classes {
                let r = p[k] - if labels[i] == k { 1.0 } else { 0.0 };
                gb[k] += r;
                for (g, x) in gw[k * self.dim..(k + 1) * self.dim].iter_mut().zip(z) {
                    *g += r * x;
                }
            }
        }
        let scale = 1.0 / idx.len() as f64;
        gw.iter_mut().for_each(|g| *g *= scale);
        gb.iter_mut().for_each(|g| *g *= scale);
        HeadGradient {
            weights: gw,
            bias: gb,
        }
    }

    pub fn apply(&mut self, grad: &HeadGradient, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|x| x.is_finite())
    }

    /// Unweighted parameter average.
    pub fn average(models: &[HeadModel]) -> Result<HeadModel> {
        let first = models.first().ok_or(BtflError::EmptyInput("head models"))?;
        let mut out = HeadModel::zeros(first.n_classes, first.dim);
        for m in models {
            if m.weights.len() != out.weights.len() || m.bias.len() != out.bias.len() {
                return Err(BtflError::DimensionMismatch {
                    expected: out.weights.len(),
                    actual: m.weights.len(),
                });
            }
            for (a, w) in out.weights.iter_mut().zip(&m.weights) {
                *a += w;
            }
            for (a, b) in out.bias.iter_mut().zip(&m.bias) {
                *a += b;
            }
        }
        let n = models.len() as f64;
        out.weights.iter_mut().for_each(|w| *w /= n);
        out.bias.iter_mut().for_each(|b| *b /= n);
        Ok(out)
    }
}

/// Minibatch SGD epochs over a shuffled index order. Fails on a non-finite
/// loss, reporting the learning rate.
pub fn sgd_epochs<R: Rng + ?Sized>(
    head: &mut HeadModel,
    features: &[FeatureVector],
    labels: &[usize],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<()> {
    if features.is_empty() {
        return Err(BtflError::EmptyInput("training set"));
    }
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..features.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let g = head.gradient(features, labels, batch);
            head.apply(&g, lr);
        }
        if !head.is_finite() {
            return Err(BtflError::Divergence {
                loss: f64::NAN,
                parameter: "lr",
                value: lr,
            });
        }
        let loss = head.loss(features, labels);
        if !loss.is_finite() || loss > 1e6 {
            return Err(BtflError::Divergence {
                loss,
                parameter: "lr",
                value: lr,
            });
        }
    }
    Ok(())
}
