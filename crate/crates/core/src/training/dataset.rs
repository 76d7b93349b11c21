//! Dataset assembly: split generation, noise calibration and frozen
//! normalization statistics.

use crate::channel::derive_seed;
use crate::channel::{
    cascaded_channel, generate_channels, CascadeMode, ChannelGenConfig, ChannelSample,
    FeatureStats, GeometryConfig, Regime,
};
use crate::precoding::{mrt_precoder, random_phase_baseline};

use super::TrainingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A split of channel samples together with the shared normalization
/// statistics (always computed on the training split).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<ChannelSample>,
    pub split: Split,
    pub stats: FeatureStats,
    pub geometry: GeometryConfig,
    pub regime: Regime,
    pub master_seed: u64,
}

/// Element indices of a uniformly placed anchor grid after `expansions`
/// tripling steps, in row-major anchor order.
pub fn anchor_elements(anchor_rows: usize, anchor_cols: usize, expansions: u32) -> Vec<usize> {
    let final_cols = anchor_cols * 3usize.pow(expansions);
    let mut elements = Vec::with_capacity(anchor_rows * anchor_cols);
    for r in 0..anchor_rows {
        for c in 0..anchor_cols {
            let (mut fr, mut fc) = (r, c);
            for _ in 0..expansions {
                fr = 3 * fr + 1;
                fc = 3 * fc + 1;
            }
            elements.push(fr * final_cols + fc);
        }
    }
    elements
}

/// Generate disjoint train/test splits, calibrate the noise power so the
/// mean per-user SNR under random phases with MRT hits `snr_db`, and freeze
/// feature statistics from the training split.
pub fn build_dataset(
    geometry: &GeometryConfig,
    regime: Regime,
    gen_cfg: &ChannelGenConfig,
    train_size: usize,
    test_size: usize,
    master_seed: u64,
    snr_db: f64,
) -> Result<(Dataset, Dataset), TrainingError> {
    if train_size == 0 || test_size == 0 {
        return Err(TrainingError::InvalidConfig(
            "both splits need at least one sample".into(),
        ));
    }
    let train_master = derive_seed(master_seed, 0x7472);
    let test_master = derive_seed(master_seed, 0x7465);
    let mut train = generate_channels(geometry, regime, train_size, train_master, gen_cfg)?;
    let mut test = generate_channels(geometry, regime, test_size, test_master, gen_cfg)?;

    // Noise calibration on the training split: mean over users and samples
    // of the MRT signal power under seeded random phases.
    let n = geometry.ris_elements();
    let mut signal_sum = 0.0;
    let mut signal_count = 0usize;
    for (index, sample) in train.iter().enumerate() {
        let phases = random_phase_baseline(n, derive_seed(train_master, 0xca11b + index as u64));
        let c = cascaded_channel(sample, &phases, CascadeMode::ClosedForm)?;
        let v = mrt_precoder(&c, sample.power_budget)?;
        let l = crate::linalg::cmatmul(&c, &v.v)?;
        for u in 0..sample.users() {
            signal_sum += l[(u, u)].norm_sqr();
            signal_count += 1;
        }
    }
    let mean_signal = signal_sum / signal_count as f64;
    let noise_power = mean_signal / 10f64.powf(snr_db / 10.0);
    for sample in train.iter_mut().chain(test.iter_mut()) {
        sample.noise_power = noise_power;
    }

    let stats = FeatureStats::from_samples(&train)?;

    Ok((
        Dataset {
            samples: train,
            split: Split::Train,
            stats,
            geometry: geometry.clone(),
            regime,
            master_seed: train_master,
        },
        Dataset {
            samples: test,
            split: Split::Test,
            stats,
            geometry: geometry.clone(),
            regime,
            master_seed: test_master,
        },
    ))
}
