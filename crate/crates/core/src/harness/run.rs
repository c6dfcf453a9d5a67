//! Seeded execution of one experiment config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continual::{finish_task, replay_mix};
use crate::env::{Environment, TaskFamily};
use crate::envs::{ChainFamily, ChainSpec, RunnerFamily, TaskSequence};
use crate::error::{Error, Result};
use crate::harness::agent::{assemble, penalty_for, Agent};
use crate::harness::config::{EnvKind, ExperimentConfig};
use crate::metrics::{summarize, TaskSummary};
use crate::nn::GaussianPolicy;
use crate::ppo::{RolloutBuffer, UpdateReport};
use crate::rng::{Purpose, RunSeed};
use crate::schedule::{ScheduleEntry, TaskSchedule};
use crate::types::{EpisodeRecord, Transition};

/// One row of the diagnostics CSV, written after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub global_step: u64,
    pub task_id: String,
    pub actor_loss: f64,
    pub value_loss: f64,
    pub cost_value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub epochs: usize,
    pub lambda: f64,
    /// Mean episodic cost of the episodes finished since the previous update.
    pub j_c: Option<f64>,
    pub cost_limit: f64,
    /// Mean per-step cost of the rollout that fed this update.
    pub rollout_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: RunSeed,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub episodes: Vec<EpisodeRecord>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub summaries: Vec<TaskSummary>,
    pub final_agent: Agent,
}

/// What an observer sees after each update.
pub struct UpdateEvent<'a> {
    pub global_step: u64,
    pub task_id: &'a str,
    pub agent: &'a Agent,
    pub report: &'a UpdateReport,
}

pub fn build_schedule(cfg: &ExperimentConfig) -> Result<TaskSchedule> {
    TaskSchedule::new(
        cfg.schedule
            .iter()
            .map(|t| ScheduleEntry {
                task: t.clone(),
                steps: cfg.steps_per_task,
            })
            .collect(),
    )
}

pub fn chain_family(cfg: &ExperimentConfig) -> Result<ChainFamily> {
    let spec = match &cfg.chain.spec_file {
        Some(p) => ChainSpec::load(p)?,
        None => ChainSpec::hazard_chain(),
    };
    Ok(ChainFamily::with_default_tasks(spec))
}

/// Runs one seed of `cfg`. Checkpoints go under `ckpt_dir` when given.
pub fn run_seed(
    cfg: &ExperimentConfig,
    seed: RunSeed,
    ckpt_dir: Option<&Path>,
    observer: &mut dyn FnMut(&UpdateEvent),
) -> Result<SeedResult> {
    match cfg.environment {
        EnvKind::Runner => run_family(cfg, RunnerFamily::from_base(&cfg.runner), seed, ckpt_dir, observer),
        EnvKind::Chain => run_family(cfg, chain_family(cfg)?, seed, ckpt_dir, observer),
    }
}

pub fn run_family<F: TaskFamily>(
    cfg: &ExperimentConfig,
    family: F,
    seed: RunSeed,
    ckpt_dir: Option<&Path>,
    observer: &mut dyn FnMut(&UpdateEvent),
) -> Result<SeedResult> {
    let schedule = build_schedule(cfg)?;
    let mut seq = TaskSequence::new(family, schedule)?;
    let mut agent = assemble(cfg, seq.observation_dim(), seq.action_dim(), seed)?;
    let mut state = SeedState::new(cfg, seed);
    let outcome = state.drive(&mut seq, &mut agent, ckpt_dir, observer);
    let (status, failure) = match outcome {
        Ok(()) => (RunStatus::Ok, None),
        Err(Error::Numeric(msg)) => (RunStatus::Failed, Some(msg)),
        Err(e) => return Err(e),
    };
    let summaries = if status == RunStatus::Ok {
        summarize(&state.episodes)?
    } else {
        Vec::new()
    };
    Ok(SeedResult {
        seed,
        status,
        failure,
        episodes: state.episodes,
        diagnostics: state.diagnostics,
        summaries,
        final_agent: agent,
    })
}

struct SeedState<'c> {
    cfg: &'c ExperimentConfig,
    seed: RunSeed,
    episodes: Vec<EpisodeRecord>,
    diagnostics: Vec<DiagnosticsRow>,
    window_costs: Vec<f64>,
}

impl<'c> SeedState<'c> {
    fn new(cfg: &'c ExperimentConfig, seed: RunSeed) -> Self {
        Self {
            cfg,
            seed,
            episodes: Vec::new(),
            diagnostics: Vec::new(),
            window_costs: Vec::new(),
        }
    }

    fn drive<F: TaskFamily>(
        &mut self,
        seq: &mut TaskSequence<F>,
        agent: &mut Agent,
        ckpt_dir: Option<&Path>,
        observer: &mut dyn FnMut(&UpdateEvent),
    ) -> Result<()> {
        let cfg = self.cfg;
        let mut env_rng = self.seed.stream(Purpose::Environment);
        let mut policy_rng = self.seed.stream(Purpose::Policy);
        let mut shuffle_rng = self.seed.stream(Purpose::Shuffle);
        let mut fisher_rng = self.seed.stream(Purpose::Fisher);
        let mut replay_rng = self.seed.stream(Purpose::Replay);
        let mut buffer = RolloutBuffer::new(cfg.ppo.update_interval);
        let has_success = seq.has_success();

        let mut obs = seq.reset(&mut env_rng);
        let (mut ep_reward, mut ep_cost, mut ep_len, mut ep_success) = (0.0, 0.0, 0usize, false);
        while !seq.finished() {
            let entry = seq.entry();
            let task = seq.current_task().to_string();
            let (action, log_prob, value, cost_value) = agent.ac.act(&obs, &mut policy_rng)?;
            let out = seq.step(&action, &mut env_rng)?;
            ep_reward += out.reward;
            ep_cost += out.cost;
            ep_len += 1;
            ep_success |= out.success;
            let ended = out.terminated || out.truncated;
            buffer.push(Transition {
                state: std::mem::take(&mut obs),
                action,
                reward: agent.stored_reward(out.reward, out.cost),
                cost: out.cost,
                next_state: out.next_state.clone(),
                terminated: out.terminated,
                truncated: out.truncated,
                log_prob,
                value,
                cost_value,
            });
            if ended {
                self.episodes.push(EpisodeRecord {
                    global_step: seq.global_step(),
                    task_id: task.clone(),
                    visit_index: seq.schedule().visit_index(entry),
                    total_reward: ep_reward,
                    total_cost: ep_cost,
                    length: ep_len,
                    success: has_success.then_some(ep_success),
                });
                self.window_costs.push(ep_cost);
                (ep_reward, ep_cost, ep_len, ep_success) = (0.0, 0.0, 0, false);
            }

            if buffer.is_full() {
                self.update(agent, &mut buffer, &task, seq.global_step(), &mut shuffle_rng, &mut replay_rng, observer)?;
            }

            if let (Some(dir), true) = (ckpt_dir, cfg.checkpoint_interval > 0) {
                if seq.global_step() % cfg.checkpoint_interval == 0 {
                    agent
                        .ac
                        .policy
                        .to_checkpoint()
                        .save(&dir.join(format!("policy_step{}.txt", seq.global_step())))?;
                }
            }

            let entry_over = seq.finished() || seq.entry() != entry;
            if entry_over {
                // Leftover transitions belong to the finished task; the next
                // task starts from an empty buffer.
                buffer.clear();
                self.window_costs.clear();
                if let Some(ewc) = &mut agent.ewc {
                    let mut env = seq.family().instantiate(&task)?;
                    finish_task(
                        &mut ewc.memory,
                        &agent.ac.policy,
                        &task,
                        &mut env,
                        ewc.fisher_samples,
                        ewc.weighting,
                        &mut fisher_rng,
                    )?;
                }
                if let Some(dir) = ckpt_dir {
                    agent
                        .ac
                        .policy
                        .to_checkpoint()
                        .save(&dir.join(format!("policy_entry{entry}.txt")))?;
                    if let Some(ewc) = &agent.ewc {
                        ewc.memory.save(dir.join(format!("ewc_entry{entry}.txt")))?;
                    }
                }
            }
            if ended && !seq.finished() {
                obs = seq.reset(&mut env_rng);
            } else {
                obs = out.next_state;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn update(
        &mut self,
        agent: &mut Agent,
        buffer: &mut RolloutBuffer,
        task: &str,
        global_step: u64,
        shuffle_rng: &mut crate::rng::Rng,
        replay_rng: &mut crate::rng::Rng,
        observer: &mut dyn FnMut(&UpdateEvent),
    ) -> Result<()> {
        let rollout_cost = buffer.transitions().iter().map(|t| t.cost).sum::<f64>() / buffer.len() as f64;
        let j_c = if self.window_costs.is_empty() {
            None
        } else {
            Some(self.window_costs.iter().sum::<f64>() / self.window_costs.len() as f64)
        };
        self.window_costs.clear();
        if let (Some(ctrl), Some(j)) = (&mut agent.controller, j_c) {
            ctrl.observe(j);
        }
        let ppo = agent.ppo.clone();
        let report = if let Some(store) = &agent.replay {
            let mixed = replay_mix(
                store,
                buffer.transitions(),
                ppo.update_interval,
                &agent.ac.critic,
                &agent.ac.cost_critic,
                ppo.gamma,
                ppo.lambda_gae,
                replay_rng,
            )?;
            let transitions = buffer.take();
            agent.replay.as_mut().expect("replay store").extend(task, &transitions);
            let penalty = crate::ppo::NoPenalty;
            agent.ac.update(&mixed.batch, &ppo, &penalty, shuffle_rng)?
        } else {
            let penalty = penalty_for(agent.ewc.as_ref(), agent.controller.as_ref(), ppo.clip);
            agent.ac.update_from_buffer(buffer, &ppo, penalty.as_ref(), shuffle_rng)?
        };
        let row = DiagnosticsRow {
            global_step,
            task_id: task.to_string(),
            actor_loss: report.actor_loss,
            value_loss: report.value_loss,
            cost_value_loss: report.cost_value_loss,
            entropy: report.entropy,
            approx_kl: report.approx_kl,
            clip_fraction: report.clip_fraction,
            epochs: report.epochs,
            lambda: agent.controller.as_ref().map_or(0.0, |c| c.lambda),
            j_c,
            cost_limit: self.cfg.cost_limit(),
            rollout_cost,
        };
        self.diagnostics.push(row);
        observer(&UpdateEvent {
            global_step,
            task_id: task,
            agent,
            report: &report,
        });
        Ok(())
    }
}

/// Everything one `run` call produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub seeds: Vec<SeedResult>,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub seed: u64,
    pub task_id: String,
    pub final_reward: Option<f64>,
    pub normalized_forgetting: Option<f64>,
    pub forgetting_degenerate: Option<bool>,
    pub total_cost: Option<f64>,
    pub success_rate: Option<f64>,
    pub status: RunStatus,
}

pub fn summary_rows(algorithm: &str, result: &SeedResult) -> Vec<SummaryRow> {
    if result.status == RunStatus::Failed {
        return vec![SummaryRow {
            algorithm: algorithm.to_string(),
            seed: result.seed.0,
            task_id: String::new(),
            final_reward: None,
            normalized_forgetting: None,
            forgetting_degenerate: None,
            total_cost: None,
            success_rate: None,
            status: RunStatus::Failed,
        }];
    }
    result
        .summaries
        .iter()
        .map(|s| SummaryRow {
            algorithm: algorithm.to_string(),
            seed: result.seed.0,
            task_id: s.task_id.clone(),
            final_reward: Some(s.final_reward),
            normalized_forgetting: s.normalized_forgetting.as_ref().map(|n| n.value),
            forgetting_degenerate: s.normalized_forgetting.as_ref().map(|n| n.degenerate),
            total_cost: Some(s.total_cost),
            success_rate: s.success_rate,
            status: RunStatus::Ok,
        })
        .collect()
}

pub fn seed_dir(out: &Path, seed: RunSeed) -> PathBuf {
    out.join(format!("seed_{}", seed.0))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Runs every seed of `cfg` and writes its artifacts under `cfg.out_dir`:
/// the resolved `config.toml`, per-seed `episodes.csv`, `diagnostics.csv`
/// and checkpoints, and a combined `summary.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    let mut summary = Vec::new();
    for &s in &cfg.seeds {
        let seed = RunSeed(s);
        let dir = seed_dir(&out, seed);
        let ckpt = dir.join("checkpoints");
        fs::create_dir_all(&ckpt)?;
        let result = run_seed(cfg, seed, Some(&ckpt), &mut |_| {})?;
        write_csv(&dir.join("episodes.csv"), &result.episodes)?;
        write_csv(&dir.join("diagnostics.csv"), &result.diagnostics)?;
        result
            .final_agent
            .ac
            .policy
            .to_checkpoint()
            .save(&dir.join("policy_final.txt"))?;
        summary.extend(summary_rows(cfg.algorithm.id(), &result));
        seeds.push(result);
    }
    write_csv(&out.join("summary.csv"), &summary)?;
    Ok(RunOutcome { dir: out, seeds })
}

/// Loads the final policy of a finished seed.
pub fn load_final_policy(out: &Path, seed: RunSeed) -> Result<GaussianPolicy> {
    GaussianPolicy::from_checkpoint(&crate::nn::Checkpoint::load(&seed_dir(out, seed).join("policy_final.txt"))?)
}
