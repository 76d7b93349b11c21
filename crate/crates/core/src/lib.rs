//! Joint configuration of a reconfigurable intelligent surface and
//! base-station precoding at desk scale.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`linalg`] — dense complex matrices, LU solves, pseudo-inverse.
//! * [`autodiff`] — reverse-mode differentiation over real tensors with an
//!   ADAM optimizer.
//! * [`channel`] — problem-instance generation, the mutual-coupling cascaded
//!   channel and its block-matrix oracle, input features.
//! * [`risnet`] — the permutation-invariant phase-shift network with full-
//!   and partial-CSI layer stacks.
//! * [`precoding`] — weighted sum-rate evaluation, WMMSE precoding and
//!   baselines.
//! * [`training`] — the alternating-optimization training loop and
//!   evaluation.

pub mod autodiff;
pub mod channel;
pub mod linalg;
pub mod precoding;
pub mod risnet;
pub mod training;
pub mod validation;

pub use autodiff::{AdamState, Tape, Tensor};
pub use channel::{ChannelSample, FeatureTensor, GeometryConfig, Regime};
pub use linalg::{
    cmatmul, lu_factor, pinv_left, spectral_norm, ComplexMatrix, LinalgError, LuFactorization,
    SolveSide,
};
pub use precoding::{PrecodingMatrix, WmmseConfig};
pub use risnet::{LayerSpec, NetworkParams, PhaseConfiguration};
pub use training::{Dataset, RunRecord, TrainConfig};
