//! Deterministic synthetic federated training.
//!
//! A Gaussian-class task is viewed through a frozen random relu extractor.
//! Client label distributions come from a symmetric Dirichlet; the global
//! head is trained with FedAvg and each client fine-tunes a personal copy.

mod client;
mod head;
mod partition;
mod task;
mod train;

pub use client::{
    build_client_state, run_federation, ClientState, Federation, FederationParams, FederationSeeds,
};
pub use head::{sgd_epochs, HeadGradient, HeadModel};
pub use partition::dirichlet_partition;
pub use task::{generate_client_data, sample_label, ExtractorSpec, TaskParams, TaskSpec};
pub use train::{
    compute_entropy_baselines, fedavg_train, personalize_head, ClientData, TrainingConfig,
};
