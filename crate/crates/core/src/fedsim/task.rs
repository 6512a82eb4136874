//! Synthetic classification task: Gaussian classes in a raw space, seen
//! through a frozen random-projection relu extractor.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::ProbVector;
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};
use crate::rng::SeedStream;

/// Shape parameters from which a [`TaskSpec`] is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub n_classes: usize,
    pub feature_dim: usize,
    pub raw_dim: usize,
    pub noise_sigma: f64,
    /// Standard deviation of the class-mean coordinates.
    pub mean_scale: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            n_classes: 10,
            feature_dim: 32,
            raw_dim: 30,
            noise_sigma: 0.6,
            mean_scale: 0.5,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(BtflError::config("n_classes", "must be >= 2"));
        }
        if self.feature_dim < 4 {
            return Err(BtflError::config("feature_dim", "must be >= 4"));
        }
        if self.raw_dim < 1 {
            return Err(BtflError::config("raw_dim", "must be >= 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(BtflError::config("noise_sigma", "must be finite and >= 0"));
        }
        if !(self.mean_scale.is_finite() && self.mean_scale > 0.0) {
            return Err(BtflError::config("mean_scale", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Frozen feature extractor `z = relu(P x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorSpec {
    pub feature_dim: usize,
    pub raw_dim: usize,
    /// Row-major `feature_dim × raw_dim`.
    pub projection: Vec<f64>,
}

impl ExtractorSpec {
    pub fn extract(&self, raw: &[f64]) -> FeatureVector {
        debug_assert_eq!(raw.len(), self.raw_dim);
        let pre = self
            .projection
            .chunks_exact(self.raw_dim)
            .map(|row| row.iter().zip(raw).map(|(w, x)| w * x).sum())
            .collect();
        FeatureVector::from_preactivation(pre)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub n_classes: usize,
    pub feature_dim: usize,
    pub raw_dim: usize,
    /// Row-major `n_classes × raw_dim`.
    pub class_means: Vec<f64>,
    pub noise_sigma: f64,
    pub extractor: ExtractorSpec,
    pub seed: u64,
}

impl TaskSpec {
    pub fn generate(params: &TaskParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let stream = SeedStream::new(seed).named("task");
        let mut rng = stream.named("class_means").rng();
        let class_means: Vec<f64> = (0..params.n_classes * params.raw_dim)
            .map(|_| params.mean_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut rng = stream.named("extractor").rng();
        let scale = 1.0 / (params.raw_dim as f64).sqrt();
        let projection = (0..params.feature_dim * params.raw_dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            n_classes: params.n_classes,
            feature_dim: params.feature_dim,
            raw_dim: params.raw_dim,
            class_means,
            noise_sigma: params.noise_sigma,
            extractor: ExtractorSpec {
                feature_dim: params.feature_dim,
                raw_dim: params.raw_dim,
                projection,
            },
            seed,
        })
    }

    pub fn class_mean(&self, label: usize) -> &[f64] {
        &self.class_means[label * self.raw_dim..(label + 1) * self.raw_dim]
    }

    /// One raw point `x ~ N(μ_label, σ² I)`.
    pub fn sample_raw<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> Vec<f64> {
        let mean = self.class_mean(label);
        if self.noise_sigma == 0.0 {
            return mean.to_vec();
        }
        let noise = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
        mean.iter().map(|m| m + noise.sample(rng)).collect()
    }
}

/// Draws a label from a class distribution by inverse CDF.
pub fn sample_label<R: Rng + ?Sized>(dist: &ProbVector, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in dist.as_slice().iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Labeled features for one client.
pub fn generate_client_data(
    task: &TaskSpec,
    class_dist: &ProbVector,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<usize>)> {
    if class_dist.len() != task.n_classes {
        return Err(BtflError::DimensionMismatch {
            expected: task.n_classes,
            actual: class_dist.len(),
        });
    }
    if n_samples < task.n_classes {
        return Err(BtflError::Domain(format!(
            "n_samples ({n_samples}) must be >= number of classes ({})",
            task.n_classes
        )));
    }
    let mut rng = SeedStream::new(seed).named("client_data").rng();
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let y = sample_label(class_dist, &mut rng);
        let raw = task.sample_raw(y, &mut rng);
        features.push(task.extractor.extract(&raw));
        labels.push(y);
    }
    Ok((features, labels))
}
