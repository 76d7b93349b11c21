//! Dataset directory format.
//!
//! A dataset is a directory holding `manifest.json` plus one binary file per
//! sample. Each sample file stores, in order, the matrices H (N x M),
//! G (U x N), D (U x M) and S_II (N x N) as row-major little-endian f64
//! interleaved (re, im) pairs, followed by the U user weights as plain f64.
//! Round-trips are bit-exact.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::ComplexMatrix;

use super::features::FeatureStats;
use super::generate::{ChannelGenConfig, Regime};
use super::geometry::GeometryConfig;
use super::{ChannelError, ChannelSample};

pub const DATASET_FORMAT: &str = "riswsr-dataset-v1";

/// Everything needed to reproduce and reinterpret the binary sample files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub geometry: GeometryConfig,
    pub regime: Regime,
    pub split: String,
    pub master_seed: u64,
    pub count: usize,
    pub gen: ChannelGenConfig,
    /// Calibrated noise power shared by every sample.
    pub noise_power: f64,
    pub power_budget: f64,
    /// Normalization statistics frozen from the training split.
    pub stats: FeatureStats,
    pub sample_seeds: Vec<u64>,
}

fn sample_file_name(index: usize) -> String {
    format!("sample_{index:05}.bin")
}

fn write_matrix(out: &mut impl Write, m: &ComplexMatrix) -> std::io::Result<()> {
    for z in m.entries() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix(input: &mut impl Read, rows: usize, cols: usize) -> std::io::Result<ComplexMatrix> {
    let mut buf = [0u8; 8];
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        input.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf);
        input.read_exact(&mut buf)?;
        let im = f64::from_le_bytes(buf);
        entries.push(Complex64::new(re, im));
    }
    Ok(ComplexMatrix::from_vec(rows, cols, entries))
}

/// Write the manifest and one binary file per sample.
pub fn save_dataset_dir(
    dir: &Path,
    manifest: &DatasetManifest,
    samples: &[ChannelSample],
) -> Result<(), ChannelError> {
    if manifest.count != samples.len() {
        return Err(ChannelError::CorruptArchive(format!(
            "manifest count {} does not match {} samples",
            manifest.count,
            samples.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let manifest_json = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join("manifest.json"), manifest_json)?;

    for (index, sample) in samples.iter().enumerate() {
        let file = fs::File::create(dir.join(sample_file_name(index)))?;
        let mut out = BufWriter::new(file);
        write_matrix(&mut out, &sample.h)?;
        write_matrix(&mut out, &sample.g)?;
        write_matrix(&mut out, &sample.d)?;
        write_matrix(&mut out, &sample.s_ii)?;
        for &w in &sample.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        out.flush()?;
    }
    Ok(())
}

/// Load a dataset directory written by [`save_dataset_dir`].
pub fn load_dataset_dir(dir: &Path) -> Result<(DatasetManifest, Vec<ChannelSample>), ChannelError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != DATASET_FORMAT {
        return Err(ChannelError::CorruptArchive(format!(
            "unsupported dataset format {:?}",
            manifest.format
        )));
    }
    if manifest.sample_seeds.len() != manifest.count {
        return Err(ChannelError::CorruptArchive(
            "sample seed list does not match count".into(),
        ));
    }
    let n = manifest.geometry.ris_elements();
    let m = manifest.geometry.bs_antennas;
    let u = manifest.geometry.users;

    let mut samples = Vec::with_capacity(manifest.count);
    for index in 0..manifest.count {
        let file = fs::File::open(dir.join(sample_file_name(index)))?;
        let mut input = BufReader::new(file);
        let h = read_matrix(&mut input, n, m)?;
        let g = read_matrix(&mut input, u, n)?;
        let d = read_matrix(&mut input, u, m)?;
        let s_ii = read_matrix(&mut input, n, n)?;
        let mut weights = Vec::with_capacity(u);
        let mut buf = [0u8; 8];
        for _ in 0..u {
            input.read_exact(&mut buf)?;
            weights.push(f64::from_le_bytes(buf));
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(ChannelError::CorruptArchive(format!(
                "sample file {} has trailing bytes",
                sample_file_name(index)
            )));
        }
        samples.push(ChannelSample {
            h,
            g,
            d,
            s_ii,
            weights,
            noise_power: manifest.noise_power,
            power_budget: manifest.power_budget,
            regime: manifest.regime,
            seed: manifest.sample_seeds[index],
        });
    }
    Ok((manifest, samples))
}
