//! Desk-scale non-stationary constrained environments.

pub mod chain;
pub mod runner;
pub mod sequence;

pub use chain::{bin_action, ChainEnv, ChainFamily, ChainSpec};
pub use runner::{runner_step, RunnerEnv, RunnerFamily, RunnerParams, RunnerState};
pub use sequence::TaskSequence;
