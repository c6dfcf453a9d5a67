//! Experience replay: a bounded FIFO of past transitions mixed 50/50 with the
//! current rollout.

use std::collections::VecDeque;

use crate::error::Result;
use crate::nn::Mlp;
use crate::ppo::update::{prepare_batch, TrainBatch};
use crate::rng::{self, Rng};
use crate::types::Transition;

pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ReplayStore {
    capacity: usize,
    long: VecDeque<(String, Transition)>,
}

impl ReplayStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            long: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.long.len()
    }

    pub fn is_empty(&self) -> bool {
        self.long.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends transitions from `task`, evicting the oldest beyond capacity.
    pub fn extend(&mut self, task: &str, transitions: &[Transition]) {
        for t in transitions {
            if self.capacity == 0 {
                return;
            }
            if self.long.len() == self.capacity {
                self.long.pop_front();
            }
            self.long.push_back((task.to_string(), t.clone()));
        }
    }

    pub fn get(&self, i: usize) -> Option<&(String, Transition)> {
        self.long.get(i)
    }
}

#[derive(Debug, Clone)]
pub struct MixedBatch {
    pub batch: TrainBatch,
    /// Task id of each replayed row; the replayed rows come first.
    pub replay_tasks: Vec<String>,
}

/// Half the update interval drawn uniformly from the long-term store, the
/// other half the most recent current transitions. Current rows keep their
/// GAE targets; replayed rows get one-step TD targets from the current
/// critics and keep their stored log-probabilities as the behaviour policy.
pub fn replay_mix(
    store: &ReplayStore,
    current: &[Transition],
    update_interval: usize,
    critic: &Mlp,
    cost_critic: &Mlp,
    gamma: f64,
    lambda: f64,
    rng: &mut Rng,
) -> Result<MixedBatch> {
    let fresh = prepare_batch(current, critic, cost_critic, gamma, lambda)?;
    if store.is_empty() {
        return Ok(MixedBatch {
            batch: fresh,
            replay_tasks: Vec::new(),
        });
    }
    let half = update_interval / 2;
    let n_replay = update_interval - half;
    let mut batch = TrainBatch::default();
    let mut replay_tasks = Vec::with_capacity(n_replay);
    let picks: Vec<usize> = if store.len() >= n_replay {
        rand::seq::index::sample(rng, store.len(), n_replay).into_vec()
    } else {
        (0..n_replay).map(|_| rng::index(rng, store.len())).collect()
    };
    for i in picks {
        let (task, t) = &store.long[i];
        let (v, next_v) = (critic.value(&t.state)?, if t.terminated { 0.0 } else { critic.value(&t.next_state)? });
        let (vc, next_vc) = (
            cost_critic.value(&t.state)?,
            if t.terminated { 0.0 } else { cost_critic.value(&t.next_state)? },
        );
        let target = t.reward + gamma * next_v;
        let cost_target = t.cost + gamma * next_vc;
        batch.states.push(t.state.clone());
        batch.actions.push(t.action.clone());
        batch.old_log_probs.push(t.log_prob);
        batch.advantages.push(target - v);
        batch.returns.push(target);
        batch.cost_advantages.push(cost_target - vc);
        batch.cost_returns.push(cost_target);
        replay_tasks.push(task.clone());
    }
    let start = fresh.len().saturating_sub(half);
    batch.append(TrainBatch {
        states: fresh.states[start..].to_vec(),
        actions: fresh.actions[start..].to_vec(),
        old_log_probs: fresh.old_log_probs[start..].to_vec(),
        advantages: fresh.advantages[start..].to_vec(),
        returns: fresh.returns[start..].to_vec(),
        cost_advantages: fresh.cost_advantages[start..].to_vec(),
        cost_returns: fresh.cost_returns[start..].to_vec(),
    });
    Ok(MixedBatch { batch, replay_tasks })
}
