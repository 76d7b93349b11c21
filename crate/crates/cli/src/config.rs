//! JSON run configuration: strict parsing, presets, and the fully resolved
//! echo written next to every artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riswsr_core::channel::{ChannelGenConfig, GeometryConfig, Regime};
use riswsr_core::risnet::{partial_csi_default_specs, LayerSpec};
use riswsr_core::training::{CsiMode, TrainConfig};

use crate::CliError;

/// Dataset split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSizes {
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            train_size: 256,
            test_size: 64,
        }
    }
}

/// Network architecture selection. Hidden sizes apply to the full-CSI
/// stack; the partial-CSI stack is fixed to the default expansion chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16, 16],
        }
    }
}

/// On-disk configuration. Unknown keys are rejected; absent keys fall back
/// to the preset (when given) and then to desk-scale defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub geometry: Option<GeometryConfig>,
    pub regime: Option<Regime>,
    pub channel: Option<ChannelGenConfig>,
    pub dataset: Option<DatasetSizes>,
    pub train: Option<TrainConfig>,
    pub net: Option<NetConfig>,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

/// Fully defaulted configuration; serialized as the config echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub regime: Regime,
    pub channel: ChannelGenConfig,
    pub dataset: DatasetSizes,
    pub train: TrainConfig,
    pub net: NetConfig,
    pub snr_db: f64,
    /// Master seed; the training stream and all artifacts derive from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Layer specs implied by the CSI mode.
    pub fn specs(&self) -> Vec<LayerSpec> {
        match self.train.csi_mode {
            CsiMode::Full => {
                let mut specs = Vec::with_capacity(self.net.hidden.len() + 1);
                let mut in_dim = 5;
                for &q in &self.net.hidden {
                    specs.push(LayerSpec::normal(in_dim, q));
                    in_dim = 4 * q;
                }
                specs.push(LayerSpec::final_layer(in_dim));
                specs
            }
            CsiMode::Partial { .. } => partial_csi_default_specs(5),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.dataset.train_size == 0 || self.dataset.test_size == 0 {
            return Err(CliError::Config("dataset sizes must be at least 1".into()));
        }
        if self.net.hidden.is_empty() {
            return Err(CliError::Config(
                "the network needs at least one hidden layer".into(),
            ));
        }
        riswsr_core::risnet::validate_specs(&self.specs())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

fn desk_deterministic() -> RunConfig {
    RunConfig {
        geometry: GeometryConfig::default(),
        regime: Regime::Deterministic,
        channel: ChannelGenConfig::default(),
        dataset: DatasetSizes::default(),
        train: TrainConfig {
            epochs: 16,
            batch_size: 64,
            learning_rate: 1e-3,
            precoder_refresh_every: 1,
            seed: 7240,
            csi_mode: CsiMode::Full,
            threads: 1,
        },
        net: NetConfig::default(),
        snr_db: 10.0,
        seed: 7240,
        out: None,
        dataset_dir: None,
        checkpoint_dir: None,
    }
}

fn paper_table() -> RunConfig {
    RunConfig {
        geometry: GeometryConfig {
            bs_antennas: 9,
            ris_rows: 36,
            ris_cols: 36,
            users: 4,
            ..Default::default()
        },
        dataset: DatasetSizes {
            train_size: 10_240,
            test_size: 1_024,
        },
        train: TrainConfig {
            epochs: 500,
            batch_size: 512,
            learning_rate: 1e-3,
            precoder_refresh_every: 1,
            seed: 7240,
            csi_mode: CsiMode::Full,
            threads: 1,
        },
        ..desk_deterministic()
    }
}

/// Parse and resolve a configuration file: preset first, explicit fields on
/// top, master seed propagated into the training stream.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    resolve(raw)
}

pub fn resolve(raw: RawConfig) -> Result<RunConfig, CliError> {
    let mut cfg = match raw.preset.as_deref() {
        None => desk_deterministic(),
        Some("desk-deterministic") => desk_deterministic(),
        Some("paper-table") => paper_table(),
        Some(other) => {
            return Err(CliError::Config(format!("unknown preset {other:?}")));
        }
    };
    if let Some(geometry) = raw.geometry {
        cfg.geometry = geometry;
    }
    if let Some(regime) = raw.regime {
        cfg.regime = regime;
    }
    if let Some(channel) = raw.channel {
        cfg.channel = channel;
    }
    if let Some(dataset) = raw.dataset {
        cfg.dataset = dataset;
    }
    if let Some(train) = raw.train {
        cfg.train = train;
    }
    if let Some(net) = raw.net {
        cfg.net = net;
    }
    if let Some(snr_db) = raw.snr_db {
        cfg.snr_db = snr_db;
    }
    if let Some(seed) = raw.seed {
        cfg.seed = seed;
    }
    cfg.out = raw.out.or(cfg.out);
    cfg.dataset_dir = raw.dataset_dir;
    cfg.checkpoint_dir = raw.checkpoint_dir;
    // one master seed drives data and training
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Write the fully resolved configuration next to a command's outputs.
pub fn write_echo(out_dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| CliError::Runtime(format!("echo serialization: {e}")))?;
    std::fs::write(out_dir.join("config_echo.json"), json)
        .map_err(|e| CliError::Runtime(format!("cannot write config echo: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_resolves_to_desk_defaults() {
        let cfg = resolve(serde_json::from_str("{}").unwrap()).unwrap();
        assert_eq!(cfg.geometry.ris_rows, 18);
        assert_eq!(cfg.geometry.ris_cols, 18);
        assert_eq!(cfg.geometry.bs_antennas, 4);
        assert_eq!(cfg.geometry.users, 2);
        assert_eq!(cfg.dataset.train_size, 256);
        assert_eq!(cfg.train.seed, cfg.seed);
    }

    #[test]
    fn paper_table_preset_matches_reported_scale() {
        let raw: RawConfig = serde_json::from_str(r#"{"preset": "paper-table"}"#).unwrap();
        let cfg = resolve(raw).unwrap();
        assert_eq!(cfg.geometry.ris_rows, 36);
        assert_eq!(cfg.geometry.ris_cols, 36);
        assert_eq!(cfg.geometry.bs_antennas, 9);
        assert_eq!(cfg.geometry.users, 4);
        assert_eq!(cfg.train.batch_size, 512);
        assert_eq!(cfg.dataset.train_size, 10_240);
        assert_eq!(cfg.dataset.test_size, 1_024);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RawConfig>(r#"{"fo": 1}"#).unwrap_err();
        assert!(err.to_string().contains("fo"));
        let nested = serde_json::from_str::<RawConfig>(r#"{"train": {"epochz": 3}}"#);
        assert!(nested.is_err());
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let dir = std::env::temp_dir().join(format!("riswsr-config-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.json");
        std::fs::write(&path, "{\n  \"seed\": oops\n}").unwrap();
        let err = load_config(&path).unwrap_err();
        let message = err.to_string();
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(message.contains("line 2"), "message: {message}");
    }

    #[test]
    fn explicit_fields_override_the_preset() {
        let raw: RawConfig = serde_json::from_str(
            r#"{"preset": "desk-deterministic", "seed": 99, "dataset": {"train_size": 8, "test_size": 4}}"#,
        )
        .unwrap();
        let cfg = resolve(raw).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.train.seed, 99);
        assert_eq!(cfg.dataset.train_size, 8);
        assert_eq!(cfg.geometry.ris_rows, 18);
    }

    #[test]
    fn echo_round_trips_through_the_loader() {
        let cfg = resolve(serde_json::from_str(r#"{"seed": 5}"#).unwrap()).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let reparsed: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(reparsed.seed, 5);
        assert_eq!(reparsed.geometry, cfg.geometry);
    }
}
