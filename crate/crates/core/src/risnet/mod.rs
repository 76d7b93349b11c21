//! The phase-shift network.
//!
//! Layers act per RIS element and user with four shared information-
//! processing classes (current/other user crossed with current/all
//! elements), so the parameter count is independent of the array size and
//! the whole network is invariant to user permutations. Expansion layers
//! grow an anchor grid by a factor of three per axis for the partial-CSI
//! variant.

mod checkpoint;
mod layers;
mod params;
mod phase;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layers::{
    expansion_forward, expansion_maps, forward, layer_forward, nu_index, tape_forward, LayerMode,
};
pub use params::{
    full_csi_default_specs, init_params, partial_csi_default_specs, validate_specs, LayerKind,
    LayerSpec, NetworkParams, UnitParams,
};
pub use phase::{phases_to_phi, PhaseConfiguration};

use thiserror::Error;

/// Class order on the feature axis, fixed as a layout contract.
pub const CLASS_ORDER: [&str; 4] = ["cc", "ca", "oc", "oa"];

/// Units per class in an expansion layer: one per 3x3 offset.
pub const EXPANSION_UNITS: usize = 9;

#[derive(Debug, Error)]
pub enum RisnetError {
    #[error("non-finite phase at index {index}")]
    NonFinitePhase { index: usize },
    #[error("layer specs do not compose: {0}")]
    BadSpecChain(String),
    #[error("feature tensor does not match the network: {0}")]
    FeatureMismatch(String),
    #[error("at least two users are required, got {users}")]
    TooFewUsers { users: usize },
    #[error("element index {index} outside the {rows}x{cols} grid")]
    OutOfGrid {
        index: usize,
        rows: usize,
        cols: usize,
    },
    #[error("checkpoint I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint manifest failure: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("checkpoint is inconsistent: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
}
