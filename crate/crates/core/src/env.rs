//! The environment interface: one stationary regime of a non-stationary
//! constrained MDP, and families that map task ids to such regimes.

use crate::error::Result;
use crate::rng::Rng;
use crate::types::StepOutcome;

pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    /// Start a new episode and return the first observation.
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;

    /// Advance one step under the current task's dynamics, reward and cost.
    ///
    /// Fails on an action of the wrong width or when called after the episode
    /// ended without an intervening [`reset`](Environment::reset).
    fn step(&mut self, action: &[f64], rng: &mut Rng) -> Result<StepOutcome>;

    /// Whether episodes carry a success flag.
    fn has_success(&self) -> bool {
        false
    }
}

/// A parameterised set of environments, one per task id.
pub trait TaskFamily {
    type Env: Environment;

    fn instantiate(&self, task: &str) -> Result<Self::Env>;

    /// Task ids this family knows about.
    fn task_ids(&self) -> Vec<String>;
}
