//! Small differentiable function approximators with hand-written gradients.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod policy;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use mlp::{Activations, Mlp, MlpShape};
pub use policy::GaussianPolicy;
