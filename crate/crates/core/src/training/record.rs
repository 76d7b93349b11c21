//! Per-epoch training records and their CSV/JSON exports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_wsr: f64,
    pub test_wsr: f64,
    pub seconds: f64,
}

/// The per-epoch trace of a training run plus an echo of the seed that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

impl RunRecord {
    pub fn final_test_wsr(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_wsr)
    }

    /// `epoch,train_wsr,test_wsr,seconds` rows with a header.
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainingError> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "epoch,train_wsr,test_wsr,seconds")?;
        for e in &self.epochs {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.6}",
                e.epoch, e.train_wsr, e.test_wsr, e.seconds
            )?;
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), TrainingError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
