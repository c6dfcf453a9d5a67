//! Safe continual reinforcement learning on non-stationary constrained
//! environments.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`], [`envs`], [`schedule`]: environments whose dynamics switch at
//!   known task boundaries (a point-mass runner with actuator damage and a
//!   tabular hazard chain with permuted action meanings).
//! - [`nn`]: small MLPs, a Gaussian policy, Adam, checkpoints and a
//!   finite-difference gradient checker.
//! - [`ppo`]: GAE, the clipped surrogate, value regression and the update loop.
//! - [`safety`]: cost-shaped reward, Lagrangian and PID multipliers.
//! - [`continual`]: EWC with plain or cost-weighted Fisher, experience replay.
//! - [`metrics`], [`oracle`]: forgetting/cost metrics and exact tabular solvers.
//! - [`harness`]: config files, algorithm assembly, seeded runs and reports.

pub mod continual;
pub mod env;
pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod ppo;
pub mod rng;
pub mod safety;
pub mod schedule;
pub mod types;

pub use env::{Environment, TaskFamily};
pub use error::{Error, Result};
pub use rng::{Purpose, RunSeed};
pub use schedule::{ScheduleEntry, TaskSchedule};
pub use types::{EpisodeRecord, StepOutcome, Transition};
