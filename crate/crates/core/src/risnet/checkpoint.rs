//! Parameter checkpoint format.
//!
//! A checkpoint directory holds `manifest.json` (layer specs, seed, class
//! order) and `params.bin` with every weight and bias as little-endian f64
//! blobs in canonical (layer, class, unit) order, weight before bias.
//! Round-trips are bit-exact.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

use super::params::{LayerSpec, NetworkParams};
use super::{RisnetError, CLASS_ORDER};

pub const CHECKPOINT_FORMAT: &str = "riswsr-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointManifest {
    format: String,
    specs: Vec<LayerSpec>,
    /// Seed the parameters were initialized from, when known.
    seed: Option<u64>,
    class_order: Vec<String>,
}

pub fn save_checkpoint(
    dir: &Path,
    params: &NetworkParams,
    seed: Option<u64>,
) -> Result<(), RisnetError> {
    fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        specs: params.specs().to_vec(),
        seed,
        class_order: CLASS_ORDER.iter().map(|s| s.to_string()).collect(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let file = fs::File::create(dir.join("params.bin"))?;
    let mut out = BufWriter::new(file);
    for tensor in params.tensors() {
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(NetworkParams, Option<u64>), RisnetError> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(RisnetError::CorruptCheckpoint(format!(
            "unsupported checkpoint format {:?}",
            manifest.format
        )));
    }
    if manifest.class_order != CLASS_ORDER {
        return Err(RisnetError::CorruptCheckpoint(format!(
            "unexpected class order {:?}",
            manifest.class_order
        )));
    }

    // rebuild tensors with the shapes the layer specs imply
    let template = super::params::init_params(&manifest.specs, 0)?;
    let shapes: Vec<Vec<usize>> = template
        .tensors()
        .iter()
        .map(|t| t.shape().to_vec())
        .collect();

    let file = fs::File::open(dir.join("params.bin"))?;
    let mut input = BufReader::new(file);
    let mut buf = [0u8; 8];
    let mut tensors = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push(Tensor::from_vec(shape, data));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(RisnetError::CorruptCheckpoint(
            "params.bin has trailing bytes".into(),
        ));
    }
    let params = NetworkParams::from_tensors(manifest.specs, tensors)?;
    Ok((params, manifest.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risnet::params::{init_params, partial_csi_default_specs};

    #[test]
    fn round_trip_is_bit_exact() {
        let specs = partial_csi_default_specs(5);
        let params = init_params(&specs, 321).unwrap();
        let dir =
            std::env::temp_dir().join(format!("riswsr-checkpoint-test-{}", std::process::id()));
        save_checkpoint(&dir, &params, Some(321)).unwrap();
        let (loaded, seed) = load_checkpoint(&dir).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(seed, Some(321));
        assert_eq!(loaded, params);
    }
}
