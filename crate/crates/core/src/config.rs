//! Experiment configuration: TOML sections, or JSON with the same schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterConfig, DEFAULT_LAMBDA};
use crate::baselines::FedTheLiteConfig;
use crate::bayes::QuadratureConfig;
use crate::bench::BenchParams;
use crate::error::{BtflError, Result};
use crate::fedsim::{FederationParams, TaskParams, TrainingConfig};
use crate::method::MethodSpec;

/// Environment variable overriding `seed`.
pub const SEED_ENV: &str = "BTFL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdapterSection {
    pub lambda: f64,
    pub quad_panels: usize,
    pub quad_tol: f64,
    pub hbu_enabled: bool,
}

impl Default for AdapterSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            lambda: DEFAULT_LAMBDA,
            quad_panels: q.panels,
            quad_tol: q.abs_tol,
            hbu_enabled: true,
        }
    }
}

impl AdapterSection {
    pub fn to_adapter_config(&self) -> AdapterConfig {
        AdapterConfig {
            lambda: self.lambda,
            quadrature: QuadratureConfig {
                panels: self.quad_panels,
                abs_tol: self.quad_tol,
            },
            hbu_enabled: self.hbu_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub methods: Vec<MethodSpec>,
    pub task: TaskParams,
    pub federation: FederationParams,
    pub training: TrainingConfig,
    pub adapter: AdapterSection,
    pub fedthe: FedTheLiteConfig,
    pub bench: BenchParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            methods: MethodSpec::default_list(),
            task: TaskParams::default(),
            federation: FederationParams::default(),
            training: TrainingConfig::default(),
            adapter: AdapterSection::default(),
            fedthe: FedTheLiteConfig::default(),
            bench: BenchParams::default(),
        }
    }
}

fn toml_error(e: impl std::fmt::Display) -> BtflError {
    let msg = e.to_string();
    // Unknown keys and type mismatches name the key in the message.
    BtflError::config(
        msg.split('`').nth(1).unwrap_or("config").to_string(),
        msg.lines().rfind(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string(),
    )
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(toml_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BtflError::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BtflError::MissingInput(format!("config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BtflError::Parse(e.to_string()))
    }

    /// Applies `BTFL_SEED` from `lookup` (normally the process environment).
    pub fn apply_env_overrides<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<()> {
        if let Some(v) = lookup(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| BtflError::config(SEED_ENV, format!("not an unsigned integer: `{v}`")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.federation.validate()?;
        self.training.validate()?;
        self.bench.validate()?;
        self.adapter.to_adapter_config().quadrature.validate()?;
        if !(self.adapter.lambda.is_finite() && self.adapter.lambda >= 3.0) {
            return Err(BtflError::config(
                "lambda",
                format!("must be >= 3, got {}", self.adapter.lambda),
            ));
        }
        if self.federation.train_samples < self.task.n_classes {
            return Err(BtflError::config("train_samples", "must be >= n_classes"));
        }
        if self.methods.is_empty() {
            return Err(BtflError::config("methods", "at least one method is required"));
        }
        let f = &self.fedthe;
        if f.step_size.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !f.step_size.is_finite() {
            return Err(BtflError::config("step_size", "must be finite and > 0"));
        }
        if !(f.ema_ratio > 0.0 && f.ema_ratio < 1.0) {
            return Err(BtflError::config("ema_ratio", "must lie in (0, 1)"));
        }
        if !(f.fd_step > 0.0 && f.fd_step < 0.5) {
            return Err(BtflError::config("fd_step", "must lie in (0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&f.e_init) {
            return Err(BtflError::config("e_init", "must lie in [0, 1]"));
        }
        Ok(())
    }
}
