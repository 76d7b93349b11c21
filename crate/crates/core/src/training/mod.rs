//! Unsupervised training of the phase network with alternating WMMSE
//! precoder refreshes.
//!
//! The loop fixes the precoders, ascends the summed weighted sum-rate over
//! minibatches by backpropagating through the network and the closed-form
//! coupled channel, and periodically recomputes the precoders from the
//! current phases. Precoders are constants on the tape: the power factor
//! inside WMMSE is found numerically, so no gradient flows through it.

mod dataset;
mod objective;
mod record;
mod run;

pub use dataset::{anchor_elements, build_dataset, Dataset, Split};
pub use objective::{
    direct_objective_value, evaluate_sample, sample_wsr_tape, tape_objective_value,
    SampleEvaluation,
};
pub use record::{EpochRecord, RunRecord};
pub use run::{evaluate, train_ao, EvalStats, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::precoding::WmmseConfig;

/// Which channel knowledge the network input uses. The objective always
/// sees the full CSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Full,
    Partial {
        anchor_rows: usize,
        anchor_cols: usize,
    },
}

/// Training-loop controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs between WMMSE recomputation; 0 keeps the initial precoders
    /// for the whole run.
    pub precoder_refresh_every: usize,
    pub seed: u64,
    pub csi_mode: CsiMode,
    /// Worker threads for per-sample work; results are independent of this.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 64,
            learning_rate: 1e-3,
            precoder_refresh_every: 1,
            seed: 1,
            csi_mode: CsiMode::Full,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        if self.epochs == 0 || self.batch_size == 0 || self.threads == 0 {
            return Err(TrainingError::InvalidConfig(
                "epochs, batch_size and threads must be at least 1".into(),
            ));
        }
        if self.learning_rate < 0.0 {
            return Err(TrainingError::InvalidConfig(
                "learning rate must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn wmmse(&self) -> WmmseConfig {
        WmmseConfig::default()
    }
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset incompatible with the run: {0}")]
    IncompatibleDataset(String),
    #[error("non-finite objective at epoch {epoch}, batch {batch}, sample {sample}")]
    NonFiniteObjective {
        epoch: usize,
        batch: usize,
        sample: usize,
    },
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Risnet(#[from] crate::risnet::RisnetError),
    #[error(transparent)]
    Precoding(#[from] crate::precoding::PrecodingError),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("record I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("record serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
}
