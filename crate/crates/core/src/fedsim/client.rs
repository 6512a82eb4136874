use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head::HeadModel;
use super::partition::dirichlet_partition;
use super::task::{generate_client_data, TaskParams, TaskSpec};
use super::train::{compute_entropy_baselines, fedavg_train, personalize_head, ClientData, TrainingConfig};
use crate::adapter::EntropyBaselines;
use crate::bayes::ProbVector;
use crate::dle::{aggregate_dles, fit_dle, fsq, DleModel, FeatureVector};
use crate::error::{BtflError, Result};
use crate::rng::SeedStream;

/// Everything a client keeps after training: both heads, both DLEs, the
/// entropy baselines, and its own training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub client_id: usize,
    pub class_distribution: ProbVector,
    pub train_features: Vec<FeatureVector>,
    pub train_labels: Vec<usize>,
    pub global_head: HeadModel,
    pub personal_head: HeadModel,
    pub local_dle: DleModel,
    pub global_dle: DleModel,
    pub baselines: EntropyBaselines,
    /// Mean training feature of this client.
    pub local_feature_mean: Vec<f64>,
    /// Unweighted mean of all clients' `local_feature_mean`.
    pub global_feature_mean: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationParams {
    pub n_clients: usize,
    /// Symmetric Dirichlet concentration of the client label distributions.
    pub concentration: f64,
    pub train_samples: usize,
}

impl Default for FederationParams {
    fn default() -> Self {
        Self {
            n_clients: 10,
            concentration: 0.1,
            train_samples: 500,
        }
    }
}

impl FederationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(BtflError::config("n_clients", "must be >= 1"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(BtflError::config(
                "concentration",
                format!("must be finite and > 0, got {}", self.concentration),
            ));
        }
        Ok(())
    }
}

/// Seeds derived from the master seed, recorded for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederationSeeds {
    pub master: u64,
    pub task: u64,
    pub partition: u64,
    pub fedavg: u64,
}

impl FederationSeeds {
    pub fn derive(master: u64) -> Self {
        let s = SeedStream::new(master);
        Self {
            master,
            task: s.named("task").seed(),
            partition: s.named("partition").seed(),
            fedavg: s.named("fedavg").seed(),
        }
    }

    pub fn client_data(&self, client_id: usize) -> u64 {
        SeedStream::new(self.master).named("client_data").indexed(client_id as u64).seed()
    }

    pub fn personalize(&self, client_id: usize) -> u64 {
        SeedStream::new(self.master).named("personalize").indexed(client_id as u64).seed()
    }
}

/// A trained federation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Federation {
    pub task: TaskSpec,
    pub clients: Vec<ClientState>,
    pub seeds: FederationSeeds,
}

fn feature_mean(features: &[FeatureVector], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for z in features {
        for (m, x) in mean.iter_mut().zip(z.as_slice()) {
            *m += x;
        }
    }
    let n = features.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Assembles a client's state, fitting its local DLE and entropy baselines.
#[allow(clippy::too_many_arguments)]
pub fn build_client_state(
    client_id: usize,
    class_distribution: ProbVector,
    train_features: Vec<FeatureVector>,
    train_labels: Vec<usize>,
    global_head: HeadModel,
    personal_head: HeadModel,
    global_dle: DleModel,
    global_feature_mean: Vec<f64>,
) -> Result<ClientState> {
    let local_dle = fit_dle(&train_features.iter().map(fsq).collect::<Vec<_>>())?;
    if local_dle.dim() != global_dle.dim() {
        return Err(BtflError::DimensionMismatch {
            expected: global_dle.dim(),
            actual: local_dle.dim(),
        });
    }
    let baselines = compute_entropy_baselines(&personal_head, &global_head, &train_features)?;
    let local_feature_mean = feature_mean(&train_features, local_dle.dim());
    Ok(ClientState {
        client_id,
        class_distribution,
        train_features,
        train_labels,
        global_head,
        personal_head,
        local_dle,
        global_dle,
        baselines,
        local_feature_mean,
        global_feature_mean,
    })
}

/// Runs the full pipeline: task, partition, client data, DLEs, FedAvg, and
/// personalization.
pub fn run_federation(
    task_params: &TaskParams,
    fed: &FederationParams,
    training: &TrainingConfig,
    master_seed: u64,
) -> Result<Federation> {
    task_params.validate()?;
    fed.validate()?;
    training.validate()?;
    let seeds = FederationSeeds::derive(master_seed);
    let task = TaskSpec::generate(task_params, seeds.task)?;
    let dists = dirichlet_partition(task.n_classes, fed.n_clients, fed.concentration, seeds.partition)?;

    let data = dists
        .par_iter()
        .enumerate()
        .map(|(i, dist)| generate_client_data(&task, dist, fed.train_samples, seeds.client_data(i)))
        .collect::<Result<Vec<_>>>()?;

    let local_dles = data
        .iter()
        .map(|(f, _)| fit_dle(&f.iter().map(fsq).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let global_dle = aggregate_dles(&local_dles)?;

    let views: Vec<ClientData<'_>> = data
        .iter()
        .map(|(f, y)| ClientData {
            features: f,
            labels: y,
        })
        .collect();
    let global_head = fedavg_train(&views, task.n_classes, task.feature_dim, training, seeds.fedavg)?;

    let personal = views
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            personalize_head(
                &global_head,
                *v,
                training.personal_epochs,
                training.personal_lr,
                training.batch_size,
                seeds.personalize(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let local_means: Vec<Vec<f64>> = data.iter().map(|(f, _)| feature_mean(f, task.feature_dim)).collect();
    let mut global_mean = vec![0.0; task.feature_dim];
    for m in &local_means {
        for (g, x) in global_mean.iter_mut().zip(m) {
            *g += x;
        }
    }
    global_mean.iter_mut().for_each(|g| *g /= fed.n_clients as f64);

    let clients = data
        .into_iter()
        .zip(dists)
        .zip(personal)
        .enumerate()
        .map(|(i, (((features, labels), dist), personal_head))| {
            build_client_state(
                i,
                dist,
                features,
                labels,
                global_head.clone(),
                personal_head,
                global_dle.clone(),
                global_mean.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Federation { task, clients, seeds })
}
