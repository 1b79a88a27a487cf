//! Minimal deterministic neural-network engine.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;
pub mod ops;

pub use adam::{Adam, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layers::{shape_chain, Conv2d, Layer, Linear};
pub use loss::{nll_backward, nll_loss, PROB_FLOOR};
pub use ops::Mode;
