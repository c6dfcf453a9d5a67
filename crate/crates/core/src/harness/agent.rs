//! Wiring each algorithm's mechanisms onto the shared PPO learner.

use crate::continual::{EwcMemory, FisherWeighting, ReplayStore};
use crate::error::Result;
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::ppo::{ActorCritic, ActorPenalty, NoPenalty, PpoConfig};
use crate::rng::{Purpose, RunSeed};
use crate::safety::{shape_reward, ConstraintConfig, ConstraintController, MultiplierMode};

#[derive(Debug, Clone)]
pub struct EwcState {
    pub memory: EwcMemory,
    pub weighting: FisherWeighting,
    pub fisher_samples: usize,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub algorithm: Algorithm,
    pub ac: ActorCritic,
    pub ppo: PpoConfig,
    /// Weight of the cost in the stored reward; zero unless shaping is on.
    pub shaping_beta: f64,
    pub ewc: Option<EwcState>,
    pub controller: Option<ConstraintController>,
    pub replay: Option<ReplayStore>,
}

impl Agent {
    /// Reward as written into the rollout buffer.
    pub fn stored_reward(&self, reward: f64, cost: f64) -> f64 {
        if self.shaping_beta == 0.0 {
            reward
        } else {
            shape_reward(reward, cost, self.shaping_beta)
        }
    }

    /// The extra actor-loss term for the coming update.
    pub fn penalty(&self) -> Box<dyn ActorPenalty + '_> {
        penalty_for(self.ewc.as_ref(), self.controller.as_ref(), self.ppo.clip)
    }
}

/// The penalty built from an agent's parts, so the learner can be borrowed
/// mutably alongside it.
pub fn penalty_for<'a>(
    ewc: Option<&'a EwcState>,
    controller: Option<&'a ConstraintController>,
    clip: f64,
) -> Box<dyn ActorPenalty + 'a> {
    if let Some(e) = ewc {
        Box::new(&e.memory)
    } else if let Some(c) = controller {
        Box::new(c.penalty(clip))
    } else {
        Box::new(NoPenalty)
    }
}

/// Builds the agent for `cfg.algorithm`. Initial parameters depend only on
/// the seed and network shape.
pub fn assemble(cfg: &ExperimentConfig, obs_dim: usize, action_dim: usize, seed: RunSeed) -> Result<Agent> {
    cfg.validate()?;
    let mut init = seed.stream(Purpose::Init);
    let ac = ActorCritic::new(obs_dim, action_dim, &cfg.hidden, &cfg.ppo, &mut init)?;
    let alg = cfg.algorithm;
    let ewc = alg.uses_ewc().then(|| EwcState {
        memory: EwcMemory::new(cfg.lambda_ewc),
        weighting: if alg == Algorithm::CfEwc {
            FisherWeighting::CostWeighted
        } else {
            FisherWeighting::Plain
        },
        fisher_samples: cfg.fisher_samples,
    });
    let controller = match alg {
        Algorithm::PpoLag => Some(MultiplierMode::Gradient),
        Algorithm::CppoPid => Some(MultiplierMode::Pid),
        _ => None,
    }
    .map(|mode| {
        ConstraintController::new(
            mode,
            ConstraintConfig {
                cost_limit: cfg.cost_limit(),
                ..cfg.constraint.clone()
            },
        )
    });
    Ok(Agent {
        algorithm: alg,
        ac,
        ppo: cfg.ppo.clone(),
        shaping_beta: if alg == Algorithm::SafeEwc { cfg.shaping.beta } else { 0.0 },
        ewc,
        controller,
        replay: (alg == Algorithm::Replay).then(|| ReplayStore::new(cfg.replay_capacity)),
    })
}
