//! Shared value types exchanged between environments, learners and metrics.

use serde::{Deserialize, Serialize};

/// One environment step, with the policy's bookkeeping at sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// Non-negative; a single constraint channel.
    pub cost: f64,
    pub next_state: Vec<f64>,
    pub terminated: bool,
    pub truncated: bool,
    pub log_prob: f64,
    pub value: f64,
    pub cost_value: f64,
}

impl Transition {
    pub fn episode_ended(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// The environment's half of a transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Set when the episode ends at the goal, for environments that define one.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub global_step: u64,
    pub task_id: String,
    pub visit_index: usize,
    pub total_reward: f64,
    pub total_cost: f64,
    pub length: usize,
    /// `None` for environments without a notion of task completion.
    pub success: Option<bool>,
}
