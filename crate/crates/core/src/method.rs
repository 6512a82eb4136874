//! Adaptation strategies behind one per-sample interface, and the textual
//! method names used in configs and reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adapter::{AdapterConfig, BtflAdapter, Event};
use crate::baselines::{fedthe_lite_adapt, fixed_mix, global_only, local_only, oracle_mix, FedTheLiteConfig, FedTheLiteState};
use crate::bayes::{BetaParams, ProbVector};
use crate::dle::FeatureVector;
use crate::error::{BtflError, Result};
use crate::fedsim::ClientState;

/// One prediction. Bayesian fields are empty for the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub y: ProbVector,
    pub e: f64,
    pub tau_hat: Option<f64>,
    pub event: Option<Event>,
    pub prior: Option<BetaParams>,
}

impl MethodOutput {
    fn plain(y: ProbVector, e: f64) -> Self {
        Self {
            y,
            e,
            tau_hat: None,
            event: None,
            prior: None,
        }
    }
}

/// A stateful per-stream predictor. `true_label` is only read by the oracle.
pub trait AdaptationMethod: Send {
    fn predict(&mut self, z: &FeatureVector, logits_l: &[f64], logits_g: &[f64], true_label: usize) -> Result<MethodOutput>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    LocalOnly,
    GlobalOnly,
    FixedMix(f64),
    OracleMix,
    FedTheLite,
    Btfl,
    /// BTFL with the historical update disabled (prior stays uniform).
    BtflNoHbu,
}

impl MethodSpec {
    pub fn default_list() -> Vec<MethodSpec> {
        vec![
            MethodSpec::LocalOnly,
            MethodSpec::GlobalOnly,
            MethodSpec::FixedMix(0.5),
            MethodSpec::OracleMix,
            MethodSpec::FedTheLite,
            MethodSpec::Btfl,
        ]
    }

    /// A fresh instance for one stream of one client.
    pub fn instantiate(
        &self,
        client: &ClientState,
        adapter: &AdapterConfig,
        fedthe: &FedTheLiteConfig,
    ) -> Result<Box<dyn AdaptationMethod>> {
        Ok(match *self {
            MethodSpec::LocalOnly => Box::new(LocalOnly),
            MethodSpec::GlobalOnly => Box::new(GlobalOnly),
            MethodSpec::FixedMix(e0) => {
                if !(0.0..=1.0).contains(&e0) {
                    return Err(BtflError::config("methods", format!("fixed_mix weight {e0} outside [0, 1]")));
                }
                Box::new(FixedMix(e0))
            }
            MethodSpec::OracleMix => Box::new(OracleMix),
            MethodSpec::FedTheLite => Box::new(FedTheLite(FedTheLiteState::new(
                client.local_feature_mean.clone(),
                client.global_feature_mean.clone(),
                *fedthe,
            ))),
            MethodSpec::Btfl | MethodSpec::BtflNoHbu => {
                let cfg = AdapterConfig {
                    hbu_enabled: matches!(self, MethodSpec::Btfl) && adapter.hbu_enabled,
                    ..*adapter
                };
                Box::new(Btfl(BtflAdapter::new(
                    client.local_dle.clone(),
                    client.global_dle.clone(),
                    client.baselines,
                    cfg,
                )?))
            }
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::LocalOnly => f.write_str("local_only"),
            MethodSpec::GlobalOnly => f.write_str("global_only"),
            MethodSpec::FixedMix(e) => write!(f, "fixed_mix({e})"),
            MethodSpec::OracleMix => f.write_str("oracle_mix"),
            MethodSpec::FedTheLite => f.write_str("fedthe_lite"),
            MethodSpec::Btfl => f.write_str("btfl"),
            MethodSpec::BtflNoHbu => f.write_str("btfl_nohbu"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = BtflError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "local_only" => MethodSpec::LocalOnly,
            "global_only" => MethodSpec::GlobalOnly,
            "oracle_mix" => MethodSpec::OracleMix,
            "fedthe_lite" => MethodSpec::FedTheLite,
            "btfl" => MethodSpec::Btfl,
            "btfl_nohbu" => MethodSpec::BtflNoHbu,
            _ => {
                let inner = s
                    .strip_prefix("fixed_mix(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| BtflError::config("methods", format!("unknown method `{s}`")))?;
                let e: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| BtflError::config("methods", format!("bad fixed_mix weight `{inner}`")))?;
                if !(0.0..=1.0).contains(&e) {
                    return Err(BtflError::config("methods", format!("fixed_mix weight {e} outside [0, 1]")));
                }
                MethodSpec::FixedMix(e)
            }
        })
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct LocalOnly;
struct GlobalOnly;
struct FixedMix(f64);
struct OracleMix;
struct FedTheLite(FedTheLiteState);
struct Btfl(BtflAdapter);

impl AdaptationMethod for LocalOnly {
    fn predict(&mut self, _: &FeatureVector, l: &[f64], _: &[f64], _: usize) -> Result<MethodOutput> {
        Ok(MethodOutput::plain(local_only(l), 0.0))
    }
}

impl AdaptationMethod for GlobalOnly {
    fn predict(&mut self, _: &FeatureVector, _: &[f64], g: &[f64], _: usize) -> Result<MethodOutput> {
        Ok(MethodOutput::plain(global_only(g), 1.0))
    }
}

impl AdaptationMethod for FixedMix {
    fn predict(&mut self, _: &FeatureVector, l: &[f64], g: &[f64], _: usize) -> Result<MethodOutput> {
        Ok(MethodOutput::plain(fixed_mix(l, g, self.0)?, self.0))
    }
}

impl AdaptationMethod for OracleMix {
    fn predict(&mut self, _: &FeatureVector, l: &[f64], g: &[f64], label: usize) -> Result<MethodOutput> {
        if label >= l.len() {
            return Err(BtflError::Domain(format!("label {label} out of range for {} classes", l.len())));
        }
        let (y, chose_global) = oracle_mix(l, g, label);
        Ok(MethodOutput::plain(y, if chose_global { 1.0 } else { 0.0 }))
    }
}

impl AdaptationMethod for FedTheLite {
    fn predict(&mut self, z: &FeatureVector, l: &[f64], g: &[f64], _: usize) -> Result<MethodOutput> {
        let step = fedthe_lite_adapt(&mut self.0, z, l, g)?;
        Ok(MethodOutput::plain(step.y, step.e))
    }
}

impl AdaptationMethod for Btfl {
    fn predict(&mut self, z: &FeatureVector, l: &[f64], g: &[f64], _: usize) -> Result<MethodOutput> {
        let out = self.0.adapt(z, l, g)?;
        Ok(MethodOutput {
            y: out.y_int,
            e: out.e,
            tau_hat: Some(out.tau_hat),
            event: Some(out.event),
            prior: Some(out.prior),
        })
    }
}
