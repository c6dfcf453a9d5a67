//! Experiment configuration files.
//!
//! A config is a TOML document. Defaults depend on the environment, so a file
//! is read in three layers: built-in defaults for its `environment`, then
//! the file itself, then command-line overrides. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continual::replay::DEFAULT_CAPACITY;
use crate::envs::{ChainFamily, ChainSpec, RunnerFamily, RunnerParams};
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;
use crate::safety::{ConstraintConfig, ShapingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    PpoLag,
    CppoPid,
    PpoEwc,
    SafeEwc,
    CfEwc,
    Replay,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Ppo,
        Algorithm::PpoLag,
        Algorithm::CppoPid,
        Algorithm::PpoEwc,
        Algorithm::SafeEwc,
        Algorithm::CfEwc,
        Algorithm::Replay,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::PpoLag => "ppo_lag",
            Algorithm::CppoPid => "cppo_pid",
            Algorithm::PpoEwc => "ppo_ewc",
            Algorithm::SafeEwc => "safe_ewc",
            Algorithm::CfEwc => "cf_ewc",
            Algorithm::Replay => "replay",
        }
    }

    pub fn uses_ewc(self) -> bool {
        matches!(self, Algorithm::PpoEwc | Algorithm::SafeEwc | Algorithm::CfEwc)
    }

    pub fn uses_multiplier(self) -> bool {
        matches!(self, Algorithm::PpoLag | Algorithm::CppoPid)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Runner,
    Chain,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    /// Plain-text chain table; the built-in hazard chain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    pub seeds: Vec<u64>,
    pub steps_per_task: u64,
    /// Task ids in visiting order; each gets `steps_per_task` steps.
    pub schedule: Vec<String>,
    pub out_dir: PathBuf,
    /// Save a policy checkpoint every this many global steps (0: only at
    /// the end of each schedule entry).
    pub checkpoint_interval: u64,
    pub hidden: Vec<usize>,
    pub lambda_ewc: f64,
    /// Cap on the Fisher rollout length.
    pub fisher_samples: usize,
    pub replay_capacity: usize,
    /// Multiplies `constraint.cost_limit` to give the limit actually enforced.
    pub cost_limit_scale: f64,
    pub ppo: PpoConfig,
    pub shaping: ShapingConfig,
    pub constraint: ConstraintConfig,
    pub runner: RunnerParams,
    pub chain: ChainSection,
}

impl ExperimentConfig {
    pub fn defaults(algorithm: Algorithm, environment: EnvKind) -> Self {
        let runner = RunnerParams::default();
        let (schedule, steps_per_task, update_interval, scale, gamma): (Vec<String>, u64, usize, f64, f64) =
            match environment {
                EnvKind::Runner => (
                    RunnerFamily::DEFAULT_SEQUENCE.iter().map(|s| s.to_string()).collect(),
                    50_000,
                    2048,
                    runner.episode_len as f64 / 1000.0,
                    PpoConfig::default().gamma,
                ),
                // The chain's own discount, so learned values line up with the oracle.
                EnvKind::Chain => (
                    ChainFamily::DEFAULT_SEQUENCE.iter().map(|s| s.to_string()).collect(),
                    5_000,
                    512,
                    1.0,
                    ChainSpec::hazard_chain().gamma,
                ),
            };
        Self {
            algorithm,
            environment,
            seeds: vec![0],
            steps_per_task,
            schedule,
            out_dir: PathBuf::from("runs").join(algorithm.id()),
            checkpoint_interval: 0,
            hidden: vec![32, 32],
            lambda_ewc: 12.926,
            fisher_samples: 1000,
            replay_capacity: DEFAULT_CAPACITY,
            cost_limit_scale: scale,
            ppo: PpoConfig {
                update_interval,
                gamma,
                ..PpoConfig::default()
            },
            shaping: ShapingConfig::default(),
            constraint: match environment {
                EnvKind::Runner => ConstraintConfig::default(),
                // ~40 updates per chain task: the published multiplier rates barely move in that time.
                EnvKind::Chain => ConstraintConfig {
                    lr_lambda: 0.5,
                    ki: 0.3,
                    ..ConstraintConfig::default()
                },
            },
            runner,
            chain: ChainSection::default(),
        }
    }

    /// Parses a config document over the defaults for its environment.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, toml::Table::new())
    }

    /// As [`from_toml`](Self::from_toml), with `overrides` applied last.
    pub fn from_toml_with(text: &str, overrides: toml::Table) -> Result<Self> {
        let mut user: toml::Table = text.parse().map_err(|e| Error::config(format!("{e}")))?;
        merge(&mut user, overrides);
        let algorithm: Algorithm = match user.get("algorithm") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::config("`algorithm` must be a string")),
            None => return Err(Error::config("missing `algorithm`")),
        };
        let environment = match user.get("environment") {
            Some(v) => v
                .clone()
                .try_into::<EnvKind>()
                .map_err(|e| Error::config(format!("environment: {e}")))?,
            None => EnvKind::Runner,
        };
        let mut base = toml::Table::try_from(Self::defaults(algorithm, environment))
            .map_err(|e| Error::config(format!("{e}")))?;
        // A runner episode length set in the file changes the default limit scale.
        if environment == EnvKind::Runner {
            if let Some(len) = user
                .get("runner")
                .and_then(|r| r.get("episode_len"))
                .and_then(toml::Value::as_integer)
            {
                base.insert("cost_limit_scale".into(), toml::Value::Float(len as f64 / 1000.0));
            }
        }
        merge(&mut base, user);
        let cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e| Error::config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The fully resolved document, defaults expanded.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The episodic cost limit the multiplier controllers enforce.
    pub fn cost_limit(&self) -> f64 {
        self.constraint.cost_limit * self.cost_limit_scale
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.constraint.validate()?;
        self.runner.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("no seeds given"));
        }
        if self.schedule.is_empty() || self.steps_per_task == 0 {
            return Err(Error::config("schedule must have at least one entry and a positive step budget"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if !(self.lambda_ewc.is_finite() && self.lambda_ewc >= 0.0) {
            return Err(Error::config("lambda_ewc must be finite and non-negative"));
        }
        if !(self.shaping.beta.is_finite() && self.shaping.beta >= 0.0) {
            return Err(Error::config("shaping.beta must be finite and non-negative"));
        }
        if !(self.cost_limit_scale.is_finite() && self.cost_limit_scale > 0.0) {
            return Err(Error::config("cost_limit_scale must be positive"));
        }
        if self.algorithm.uses_ewc() && self.fisher_samples == 0 {
            return Err(Error::config("EWC variants need fisher_samples > 0"));
        }
        if self.algorithm == Algorithm::Replay && self.replay_capacity == 0 {
            return Err(Error::config("replay needs replay_capacity > 0"));
        }
        if self.environment == EnvKind::Runner && self.chain.spec_file.is_some() {
            return Err(Error::config("chain.spec_file given for the runner environment"));
        }
        Ok(())
    }
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
