//! Experiment front end: config files, algorithm assembly, seeded runs,
//! on-disk artifacts and cross-seed reports.

pub mod agent;
pub mod checks;
pub mod config;
pub mod report;
pub mod run;

pub use agent::{assemble, Agent};
pub use checks::{gradient_suite, oracle_check};
pub use config::{Algorithm, EnvKind, ExperimentConfig};
pub use report::{report, ExperimentData, ReportRow, SeedAggregate};
pub use run::{run, run_seed, RunOutcome, RunStatus, SeedResult, UpdateEvent};
