//! Reverse-mode automatic differentiation over real tensors.
//!
//! Complex arithmetic is expressed as paired real channels, so the objective
//! stays a plain real scalar and no complex-derivative calculus is needed.
//! Tapes evaluate eagerly and replay deterministically.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::gradcheck;
pub use tape::{Channel, NodeId, OpKind, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: String, detail: String },
    #[error("backward requires a one-element output, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },
    #[error("non-finite gradient for parameter {param_index}")]
    NonFiniteGradient { param_index: usize },
    #[error("non-finite function evaluation at coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}
