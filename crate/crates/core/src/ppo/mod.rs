//! The on-policy backbone shared by every algorithm.

pub mod buffer;
pub mod gae;
pub mod loss;
pub mod update;

pub use buffer::{RolloutBuffer, Segment};
pub use gae::{compute_gae, compute_returns};
pub use loss::{clipped_policy_loss, entropy_term, normalize, value_loss, weighted_surrogates, SurrogateOutput};
pub use update::{
    prepare_batch, ActorCritic, ActorPenalty, FnPenalty, NoPenalty, PpoConfig, TrainBatch, UpdateReport,
};
