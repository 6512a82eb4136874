//! The five per-client test streams.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bayes::ProbVector;
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};
use crate::fedsim::{sample_label, ClientState, TaskSpec};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamTag {
    OrigInd,
    ShiftInd,
    OrigExd,
    ShiftExd,
    Synthetical,
}

impl StreamTag {
    pub const ALL: [StreamTag; 5] = [
        StreamTag::OrigInd,
        StreamTag::ShiftInd,
        StreamTag::OrigExd,
        StreamTag::ShiftExd,
        StreamTag::Synthetical,
    ];

    /// Short name used in CSV files.
    pub fn as_str(&self) -> &'static str {
        match self {
            StreamTag::OrigInd => "orig_ind",
            StreamTag::ShiftInd => "shift_ind",
            StreamTag::OrigExd => "orig_exd",
            StreamTag::ShiftExd => "shift_exd",
            StreamTag::Synthetical => "synthetical",
        }
    }

    pub fn is_shifted(&self) -> bool {
        matches!(self, StreamTag::ShiftInd | StreamTag::ShiftExd)
    }

    pub fn is_exd(&self) -> bool {
        matches!(self, StreamTag::OrigExd | StreamTag::ShiftExd)
    }
}

impl fmt::Display for StreamTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StreamTag {
    type Err = BtflError;

    fn from_str(s: &str) -> Result<Self> {
        StreamTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| BtflError::Parse(format!("unknown stream tag `{s}`")))
    }
}

/// Covariate shift applied in raw space before the extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShiftOperator {
    /// Additive `N(0, sigma²)` noise.
    Corruption { sigma: f64 },
    /// `x ↦ A x + b`, `A` row-major.
    Domain { matrix: Vec<f64>, offset: Vec<f64> },
}

impl ShiftOperator {
    pub fn apply<R: Rng + ?Sized>(&self, raw: &[f64], rng: &mut R) -> Vec<f64> {
        match self {
            ShiftOperator::Corruption { sigma } => raw
                .iter()
                .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            ShiftOperator::Domain { matrix, offset } => matrix
                .chunks_exact(raw.len())
                .zip(offset)
                .map(|(row, b)| b + row.iter().zip(raw).map(|(a, x)| a * x).sum::<f64>())
                .collect(),
        }
    }

    pub fn identity_domain(raw_dim: usize) -> Self {
        let mut matrix = vec![0.0; raw_dim * raw_dim];
        for i in 0..raw_dim {
            matrix[i * raw_dim + i] = 1.0;
        }
        ShiftOperator::Domain {
            matrix,
            offset: vec![0.0; raw_dim],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    pub n_per_stream: usize,
    /// Corruption noise as a multiple of the task noise.
    pub shift_severity: f64,
    /// Size of the random perturbation `A = I + s·G/√raw_dim`, `b = s·σ·g`.
    pub domain_strength: f64,
    /// Evaluation worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            n_per_stream: 1000,
            shift_severity: 1.0,
            domain_strength: 0.5,
            workers: 0,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_stream == 0 || !self.n_per_stream.is_multiple_of(4) {
            return Err(BtflError::config(
                "n_per_stream",
                format!("must be a positive multiple of 4, got {}", self.n_per_stream),
            ));
        }
        if !(self.shift_severity.is_finite() && self.shift_severity >= 0.0) {
            return Err(BtflError::config("shift_severity", "must be finite and >= 0"));
        }
        if !(self.domain_strength.is_finite() && self.domain_strength >= 0.0) {
            return Err(BtflError::config("domain_strength", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// The pair of shifts shared by every client of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSet {
    pub corruption: ShiftOperator,
    pub domain: ShiftOperator,
}

impl ShiftSet {
    pub fn generate(task: &TaskSpec, params: &BenchParams, seed: u64) -> Self {
        let n = task.raw_dim;
        let mut rng = SeedStream::new(seed).named("domain_shift").rng();
        let s = params.domain_strength;
        let scale = s / (n as f64).sqrt();
        let mut matrix: Vec<f64> = (0..n * n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..n {
            matrix[i * n + i] += 1.0;
        }
        let offset = (0..n)
            .map(|_| s * task.noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            corruption: ShiftOperator::Corruption {
                sigma: params.shift_severity * task.noise_sigma,
            },
            domain: ShiftOperator::Domain { matrix, offset },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub z: FeatureVector,
    pub label: usize,
    /// The stream the sample was originally drawn for.
    pub source: StreamTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStream {
    pub tag: StreamTag,
    pub client_id: usize,
    pub seed: u64,
    pub samples: Vec<BenchSample>,
}

/// Mass proportional to `max(0, 1/K − p_c)`. A uniform client has an empty
/// complement and falls back to uniform over all classes.
pub fn complement_distribution(dist: &ProbVector) -> ProbVector {
    let k = dist.len();
    let u = 1.0 / k as f64;
    let w: Vec<f64> = dist.as_slice().iter().map(|p| (u - p).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    if total <= 1e-12 {
        log::warn!("class distribution is uniform; EXD streams fall back to all classes");
        return ProbVector::uniform(k);
    }
    ProbVector::new(w.into_iter().map(|x| x / total).collect()).expect("normalized weights")
}

/// Labels and clean raw inputs come from `base`, so a shifted stream is its
/// unshifted sibling with the shift applied; shift noise comes from `noise`.
fn draw(
    task: &TaskSpec,
    dist: &ProbVector,
    shifts: Option<&ShiftSet>,
    tag: StreamTag,
    n: usize,
    base: SeedStream,
    noise: SeedStream,
) -> Vec<BenchSample> {
    let mut rng = base.rng();
    let mut noise_rng = noise.rng();
    (0..n)
        .map(|i| {
            let label = sample_label(dist, &mut rng);
            let mut raw = task.sample_raw(label, &mut rng);
            if let Some(s) = shifts {
                let op = if i % 2 == 0 { &s.corruption } else { &s.domain };
                raw = op.apply(&raw, &mut noise_rng);
            }
            BenchSample {
                z: task.extractor.extract(&raw),
                label,
                source: tag,
            }
        })
        .collect()
}

/// Builds all five streams for one client. Shifted streams alternate
/// corruption (even positions) and domain shift (odd positions).
pub fn build_btgfl_streams(
    client: &ClientState,
    task: &TaskSpec,
    shifts: &ShiftSet,
    n_per_stream: usize,
    seed: u64,
) -> Result<Vec<BenchmarkStream>> {
    if n_per_stream == 0 || !n_per_stream.is_multiple_of(4) {
        return Err(BtflError::config(
            "n_per_stream",
            format!("must be a positive multiple of 4, got {n_per_stream}"),
        ));
    }
    if client.class_distribution.len() != task.n_classes {
        return Err(BtflError::DimensionMismatch {
            expected: task.n_classes,
            actual: client.class_distribution.len(),
        });
    }
    let root = SeedStream::new(seed).named("streams").indexed(client.client_id as u64);
    let ind = &client.class_distribution;
    let exd = complement_distribution(ind);
    let parts = [
        (StreamTag::OrigInd, StreamTag::OrigInd, ind, None),
        (StreamTag::ShiftInd, StreamTag::OrigInd, ind, Some(shifts)),
        (StreamTag::OrigExd, StreamTag::OrigExd, &exd, None),
        (StreamTag::ShiftExd, StreamTag::OrigExd, &exd, Some(shifts)),
    ];
    let mut streams: Vec<BenchmarkStream> = parts
        .into_iter()
        .map(|(tag, base, dist, shift)| {
            let s = root.named(tag.as_str());
            BenchmarkStream {
                tag,
                client_id: client.client_id,
                seed: s.seed(),
                samples: draw(task, dist, shift, tag, n_per_stream, root.named(base.as_str()), s),
            }
        })
        .collect();

    let quarter = n_per_stream / 4;
    // Shifted streams reuse their sibling's draws, so take the second
    // quarter from them so the synthetical stream has no duplicated draws.
    let mut mixed: Vec<BenchSample> = streams
        .iter()
        .flat_map(|s| {
            let start = if s.tag.is_shifted() { quarter } else { 0 };
            s.samples[start..start + quarter].iter().cloned()
        })
        .collect();
    let s = root.named(StreamTag::Synthetical.as_str());
    mixed.shuffle(&mut s.rng());
    streams.push(BenchmarkStream {
        tag: StreamTag::Synthetical,
        client_id: client.client_id,
        seed: s.seed(),
        samples: mixed,
    });
    Ok(streams)
}
