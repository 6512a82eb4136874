//! Agreement between the two heads as the number of classes grows.

use rayon::prelude::*;

use crate::bayes::softmax;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::fedsim::{generate_client_data, run_federation, TaskParams};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPoint {
    pub n_classes: usize,
    /// Mean cosine similarity of the personal and global softmax outputs.
    pub mean_lambda_s: f64,
}

/// Mean `λ_s = cos(softmax(l), softmax(g))` over fresh in-distribution
/// samples of every client, for a federation trained at each class count.
/// Everything except `n_classes` is taken from `base`; the training split
/// grows to at least `2·K` samples per client.
pub fn lambda_s_sweep(base: &ExperimentConfig, class_counts: &[usize], samples_per_client: usize) -> Result<Vec<LambdaPoint>> {
    class_counts
        .iter()
        .map(|&k| {
            let task = TaskParams {
                n_classes: k,
                ..base.task
            };
            let mut fed_params = base.federation;
            fed_params.train_samples = fed_params.train_samples.max(2 * k);
            let fed = run_federation(&task, &fed_params, &base.training, base.seed)?;
            let probe = SeedStream::new(base.seed).named("lambda_s").indexed(k as u64);
            let sums = fed
                .clients
                .par_iter()
                .map(|c| {
                    let (f, _) = generate_client_data(
                        &fed.task,
                        &c.class_distribution,
                        samples_per_client.max(k),
                        probe.indexed(c.client_id as u64).seed(),
                    )?;
                    let s: f64 = f
                        .iter()
                        .map(|z| {
                            let l = softmax(&c.personal_head.logits(z.as_slice()));
                            let g = softmax(&c.global_head.logits(z.as_slice()));
                            l.cosine(&g)
                        })
                        .sum();
                    Ok((s, f.len()))
                })
                .collect::<Result<Vec<_>>>()?;
            let (s, n) = sums.iter().fold((0.0, 0usize), |a, b| (a.0 + b.0, a.1 + b.1));
            Ok(LambdaPoint {
                n_classes: k,
                mean_lambda_s: s / n as f64,
            })
        })
        .collect()
}
