//! FedAvg training of the global head, local personalization, and the
//! training-set entropy baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head::{sgd_epochs, HeadModel};
use crate::adapter::EntropyBaselines;
use crate::bayes::{entropy, softmax};
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    /// Multiplicative learning-rate decay per round.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub personal_epochs: usize,
    pub personal_lr: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            rounds: 30,
            local_epochs: 2,
            lr: 0.1,
            lr_decay: 0.99,
            batch_size: 10,
            personal_epochs: 30,
            personal_lr: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(BtflError::config("rounds", "must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(BtflError::config("lr", "must be finite and > 0"));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(BtflError::config("lr_decay", "must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(BtflError::config("batch_size", "must be >= 1"));
        }
        if !(self.personal_lr.is_finite() && self.personal_lr > 0.0) {
            return Err(BtflError::config("personal_lr", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// One client's training set.
#[derive(Debug, Clone, Copy)]
pub struct ClientData<'a> {
    pub features: &'a [FeatureVector],
    pub labels: &'a [usize],
}

/// Rounds of local SGD followed by unweighted parameter averaging.
///
/// Local steps within a round run in parallel; each round's shuffling
/// stream is shared by all clients, so clients holding identical data make
/// identical updates.
pub fn fedavg_train(
    clients: &[ClientData<'_>],
    n_classes: usize,
    dim: usize,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<HeadModel> {
    if clients.is_empty() {
        return Err(BtflError::EmptyInput("clients"));
    }
    cfg.validate()?;
    let stream = SeedStream::new(seed).named("fedavg");
    let mut global = HeadModel::zeros(n_classes, dim);
    let mut lr = cfg.lr;
    for round in 0..cfg.rounds {
        let round_stream = stream.indexed(round as u64);
        let locals = clients
            .par_iter()
            .map(|c| {
                let mut local = global.clone();
                let mut rng = round_stream.rng();
                sgd_epochs(
                    &mut local,
                    c.features,
                    c.labels,
                    cfg.local_epochs,
                    lr,
                    cfg.batch_size,
                    &mut rng,
                )?;
                Ok(local)
            })
            .collect::<Result<Vec<_>>>()?;
        global = HeadModel::average(&locals)?;
        lr *= cfg.lr_decay;
    }
    Ok(global)
}

/// Fine-tunes a copy of the global head on one client's data.
pub fn personalize_head(
    global: &HeadModel,
    data: ClientData<'_>,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<HeadModel> {
    let mut head = global.clone();
    let mut rng = SeedStream::new(seed).named("personalize").rng();
    sgd_epochs(&mut head, data.features, data.labels, epochs, lr, batch_size, &mut rng)?;
    Ok(head)
}

/// Mean prediction entropy of each head over the training features.
pub fn compute_entropy_baselines(
    head_l: &HeadModel,
    head_g: &HeadModel,
    train_features: &[FeatureVector],
) -> Result<EntropyBaselines> {
    if train_features.is_empty() {
        return Err(BtflError::EmptyInput("training features"));
    }
    let mean_entropy = |head: &HeadModel| {
        train_features
            .iter()
            .map(|z| entropy(&softmax(&head.logits(z.as_slice()))))
            .sum::<f64>()
            / train_features.len() as f64
    };
    Ok(EntropyBaselines::new(mean_entropy(head_l), mean_entropy(head_g)))
}
