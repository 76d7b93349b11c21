//! Problem-instance generation and the mutual-coupling cascaded channel.
//!
//! Three channel regimes are supported: a geometric sparse model built from
//! planar-wavefront paths, the same model with added i.i.d. scattering on
//! the RIS-user link, and a fully i.i.d. model. Coupling between RIS
//! elements enters through an S-parameter matrix with distance-decaying
//! magnitude, and the cascaded base-station-to-user channel is assembled
//! either in closed form (LU solve, never an explicit inverse) or through
//! the full block scattering-matrix oracle.

mod archive;
mod cascade;
mod coupling;
mod features;
mod generate;
mod geometry;

pub use archive::{load_dataset_dir, save_dataset_dir, DatasetManifest, DATASET_FORMAT};
pub use cascade::{cascaded_channel, oracle_channel_general, CascadeMode};
pub use coupling::{generate_s_ii, CouplingMatrix};
pub use features::{compute_features, FeatureStats, FeatureTensor, LOG_FLOOR_DB};
pub use generate::{derive_seed, friis_gain, generate_channels, ChannelGenConfig, Regime};
pub use geometry::GeometryConfig;

use crate::linalg::ComplexMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Risnet(#[from] crate::risnet::RisnetError),
    #[error("archive I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive manifest failure: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("archive is inconsistent: {0}")]
    CorruptArchive(String),
}

/// One problem instance: the three channel matrices, the RIS coupling
/// matrix, user weights, noise power and power budget.
#[derive(Debug, Clone)]
pub struct ChannelSample {
    /// BS-to-RIS channel, `N x M`.
    pub h: ComplexMatrix,
    /// RIS-to-user channel, `U x N`.
    pub g: ComplexMatrix,
    /// Direct BS-to-user channel, `U x M`.
    pub d: ComplexMatrix,
    /// RIS mutual-coupling matrix, `N x N`, zero diagonal, spectral norm
    /// below 0.9.
    pub s_ii: ComplexMatrix,
    /// Nonnegative user weights summing to one.
    pub weights: Vec<f64>,
    /// Noise power at each receiver.
    pub noise_power: f64,
    /// Transmit power budget.
    pub power_budget: f64,
    pub regime: Regime,
    pub seed: u64,
}

impl ChannelSample {
    pub fn ris_elements(&self) -> usize {
        self.h.rows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.h.cols()
    }

    pub fn users(&self) -> usize {
        self.g.rows()
    }
}
