//! Experiment configuration files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::polygonal_holder::HolderMethod;
use crate::process_gen::ProcessModel;
use crate::quantile_core::{ConditionKind, DecaySeq, QuantileFn};

pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Conditions(ConditionsExp),
    Coefficients(CoefficientsExp),
    Tightness(TightnessExp),
    FukNagaev(FukNagaevExp),
    Shao(ShaoExp),
    Counterexample(CounterexampleExp),
    HolderClt(HolderCltExp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsExp {
    pub kind: ConditionKind,
    pub p: f64,
    pub dist: QuantileFn,
    #[serde(default = "zero_decay")]
    pub decay: DecaySeq,
    pub t_grid: Vec<f64>,
}

fn zero_decay() -> DecaySeq {
    DecaySeq::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsExp {
    pub joint: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessExp {
    pub model: String,
    pub n: usize,
    pub delta: f64,
    pub eps: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FukNagaevExp {
    pub model: String,
    pub n: usize,
    pub r: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShaoExp {
    pub model: String,
    pub q: f64,
    pub n_grid: Vec<usize>,
    /// In units of `sqrt(N) ||f||_2`.
    pub x_multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleExp {
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    pub event_level: usize,
    pub sigma_m: Vec<f64>,
    pub n_grid: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderCltExp {
    pub model: String,
    pub alpha: f64,
    pub n_grid: Vec<usize>,
    pub method: HolderMethod,
    /// Paths are divided by this before the statistic is taken.
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} = {v} must be positive and finite")))
    }
}

fn non_empty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(config_err(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

/// Builds a model from its preset name, reporting failures as config errors.
pub fn model_from_name(name: &str) -> Result<ProcessModel> {
    ProcessModel::from_preset(name).map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => config_err(format!("model {name:?}: {other}")),
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical serialization, without the output location.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&ExperimentConfig { out_dir: None, ..self.clone() }).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(config_err(format!("paths = {} is below the minimum {MIN_PATHS}", self.paths)));
        }
        let wrap = |r: Result<()>| r.map_err(|e| config_err(e.to_string()));
        match &self.experiment {
            Experiment::Conditions(c) => {
                if !(c.p > 2.0) {
                    return Err(config_err(format!("p = {} must exceed 2", c.p)));
                }
                wrap(c.dist.validate())?;
                wrap(c.decay.validate())?;
                non_empty("t_grid", &c.t_grid)?;
                c.t_grid.iter().try_for_each(|t| positive("t", *t))
            }
            Experiment::Coefficients(c) => {
                wrap(crate::dependence::FinitePartitionPair::new(c.joint.clone()).map(|_| ()))
            }
            Experiment::Tightness(t) => {
                model_from_name(&t.model)?;
                if !(t.delta > 0.0 && t.delta <= 1.0) {
                    return Err(config_err(format!("delta = {} must lie in (0, 1]", t.delta)));
                }
                if !(t.p > 2.0) {
                    return Err(config_err(format!("p = {} must exceed 2", t.p)));
                }
                if t.n < 4 {
                    return Err(config_err("n must be at least 4"));
                }
                non_empty("eps", &t.eps)?;
                t.eps.iter().try_for_each(|e| positive("eps", *e))
            }
            Experiment::FukNagaev(f) => {
                model_from_name(&f.model)?;
                if f.n == 0 {
                    return Err(config_err("n must be positive"));
                }
                if !(f.r >= 1.0) {
                    return Err(config_err(format!("r = {} must be at least 1", f.r)));
                }
                non_empty("lambdas", &f.lambdas)?;
                f.lambdas.iter().try_for_each(|l| positive("lambda", *l))
            }
            Experiment::Shao(s) => {
                model_from_name(&s.model)?;
                if !(s.q >= 2.0) {
                    return Err(config_err(format!("q = {} must be at least 2", s.q)));
                }
                non_empty("n_grid", &s.n_grid)?;
                if s.n_grid.contains(&0) {
                    return Err(config_err("n_grid entries must be positive"));
                }
                non_empty("x_multipliers", &s.x_multipliers)?;
                s.x_multipliers.iter().try_for_each(|x| positive("x multiplier", *x))
            }
            Experiment::Counterexample(c) => {
                if !(c.p > 2.0) {
                    return Err(config_err(format!("p = {} must exceed 2", c.p)));
                }
                if c.event_level == 0 {
                    return Err(config_err("event_level starts at 1"));
                }
                non_empty("n_grid", &c.n_grid)?;
                if c.n_grid.contains(&0) {
                    return Err(config_err("n_grid entries must be positive"));
                }
                if c.sigma_m.iter().any(|s| !(*s >= 0.0)) {
                    return Err(config_err("sigma_m entries must be non-negative"));
                }
                Ok(())
            }
            Experiment::HolderClt(h) => {
                model_from_name(&h.model)?;
                if !(h.alpha > 0.0 && h.alpha <= 1.0) {
                    return Err(config_err(format!("alpha = {} must lie in (0, 1]", h.alpha)));
                }
                positive("scale", h.scale)?;
                non_empty("n_grid", &h.n_grid)?;
                if h.n_grid.iter().any(|n| *n < 2) {
                    return Err(config_err("n_grid entries must be at least 2"));
                }
                Ok(())
            }
        }
    }
}
