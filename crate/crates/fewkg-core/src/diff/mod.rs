//! Differentiable-computation substrate.
//!
//! A [`Tape`] records tensor-granularity operations during the forward pass;
//! [`Tape::backward`] replays them in reverse to accumulate gradients.
//! Parameters live in a [`ParameterSet`] (a named, ordered map of tensors)
//! and are bound onto a tape through a [`Binder`] so gradients can be read
//! back by name. [`finite_difference_check`] is the oracle used to validate
//! every backward rule and the full model loss.

mod adam;
mod fdcheck;
mod init;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, sgd_step, AdamState};
pub use fdcheck::{finite_difference_check, FdEntry, FdReport};
pub use init::xavier_init;
pub use params::{Binder, ParameterSet};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("shape mismatch for '{name}': {left} vs {right}")]
    ShapeMismatch { name: alloc::string::String, left: alloc::string::String, right: alloc::string::String },
    #[error("loss evaluated to a non-finite value")]
    NonFiniteLoss,
}
