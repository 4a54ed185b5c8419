//! Dense `f64` tensors, tape-based autodiff, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod graph;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use graph::{sigmoid, softmax, softmax_in_place, Graph, Var};
pub use params::{Gradients, ParamId, ParamSet, INIT_SCALE};
pub use tensor::Tensor;

/// Global gradient-norm ceiling applied before every optimizer step.
pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward needs a scalar loss, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config hash mismatch: checkpoint has {found}, expected {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod gradcheck;
