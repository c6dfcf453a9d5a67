//! Forgetting mitigation: EWC anchors, Fisher estimates and experience replay.

pub mod ewc;
pub mod fisher;
pub mod replay;

pub use ewc::{ewc_penalty, EwcEntry, EwcMemory};
pub use fisher::{estimate_fisher, finish_task, fisher_weights, FisherWeighting};
pub use replay::{replay_mix, MixedBatch, ReplayStore};
