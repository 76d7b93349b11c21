//! The alternating-optimization training loop and dataset evaluation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{adam_step, AdamState, Tape, Tensor};
use crate::channel::{compute_features, derive_seed, FeatureTensor};
use crate::precoding::{PrecodingMatrix, WmmseConfig};
use crate::risnet::{init_params, LayerKind, LayerSpec, NetworkParams};

use super::dataset::{anchor_elements, Dataset};
use super::objective::{evaluate_sample, sample_wsr_tape};
use super::record::{EpochRecord, RunRecord};
use super::{CsiMode, TrainConfig, TrainingError};

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub record: RunRecord,
}

/// Summary statistics of a dataset evaluation.
#[derive(Debug, Clone)]
pub struct EvalStats {
    pub mean_wsr: f64,
    pub std_wsr: f64,
    pub per_sample: Vec<f64>,
}

struct Prepared {
    features: Vec<FeatureTensor>,
    input_grid: (usize, usize),
}

/// Resolve the network input grid and per-sample feature tensors for the
/// CSI mode, validating that expansion layers reproduce the RIS grid.
fn prepare_inputs(
    dataset: &Dataset,
    specs: &[LayerSpec],
    csi_mode: CsiMode,
) -> Result<Prepared, TrainingError> {
    let expansions = specs
        .iter()
        .filter(|s| s.kind == LayerKind::Expansion)
        .count() as u32;
    let growth = 3usize.pow(expansions);
    let geometry = &dataset.geometry;

    let (anchor_set, input_grid) = match csi_mode {
        CsiMode::Full => {
            if expansions != 0 {
                return Err(TrainingError::IncompatibleDataset(
                    "full-CSI mode cannot drive expansion layers".into(),
                ));
            }
            (None, (geometry.ris_rows, geometry.ris_cols))
        }
        CsiMode::Partial {
            anchor_rows,
            anchor_cols,
        } => {
            if anchor_rows * growth != geometry.ris_rows
                || anchor_cols * growth != geometry.ris_cols
            {
                return Err(TrainingError::IncompatibleDataset(format!(
                    "anchor grid {anchor_rows}x{anchor_cols} with {expansions} expansions does \
                     not tile the {}x{} RIS",
                    geometry.ris_rows, geometry.ris_cols
                )));
            }
            (
                Some(anchor_elements(anchor_rows, anchor_cols, expansions)),
                (anchor_rows, anchor_cols),
            )
        }
    };

    let features = dataset
        .samples
        .iter()
        .map(|sample| compute_features(sample, anchor_set.as_deref(), &dataset.stats))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        features,
        input_grid,
    })
}

fn refresh_precoders(
    dataset: &Dataset,
    prepared: &Prepared,
    params: &NetworkParams,
    wmmse_cfg: &WmmseConfig,
) -> Result<Vec<PrecodingMatrix>, TrainingError> {
    dataset
        .samples
        .par_iter()
        .zip(prepared.features.par_iter())
        .map(|(sample, features)| {
            evaluate_sample(sample, features, params, prepared.input_grid, wmmse_cfg)
                .map(|eval| eval.precoder)
        })
        .collect()
}

/// Train the network by gradient ascent on the summed weighted sum-rate,
/// alternating with WMMSE precoder recomputation. Deterministic per seed
/// and independent of the thread count.
pub fn train_ao(
    train: &Dataset,
    test: &Dataset,
    specs: &[LayerSpec],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainingError> {
    cfg.validate()?;
    if train.geometry != test.geometry {
        return Err(TrainingError::IncompatibleDataset(
            "train and test geometry differ".into(),
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .expect("thread pool construction");

    let prepared_train = prepare_inputs(train, specs, cfg.csi_mode)?;
    let prepared_test = prepare_inputs(test, specs, cfg.csi_mode)?;
    let wmmse_cfg = cfg.wmmse();

    let mut params = init_params(specs, derive_seed(cfg.seed, 0x1217))?;
    let mut adam = AdamState::new(params.tensors());
    let mut precoders =
        pool.install(|| refresh_precoders(train, &prepared_train, &params, &wmmse_cfg))?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x5437));
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.precoder_refresh_every > 0 && epoch > 0 && epoch % cfg.precoder_refresh_every == 0 {
            precoders =
                pool.install(|| refresh_precoders(train, &prepared_train, &params, &wmmse_cfg))?;
        }

        // fixed shuffle stream: one permutation per epoch
        let mut order: Vec<usize> = (0..train.samples.len()).collect();
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut train_wsr_sum = 0.0;
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            // per-sample objective values and gradients, reduced in sample
            // order so thread count cannot affect the result
            let results: Vec<(f64, Vec<Tensor>)> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&sample_index| {
                        let mut tape = Tape::new();
                        let node = sample_wsr_tape(
                            &mut tape,
                            &train.samples[sample_index],
                            &prepared_train.features[sample_index],
                            &precoders[sample_index],
                            &params,
                            prepared_train.input_grid,
                        )?;
                        let value = tape.value(node).item();
                        let grads = tape.backward(node)?;
                        Ok((value, grads))
                    })
                    .collect::<Result<Vec<_>, TrainingError>>()
            })?;

            let mut batch_grads: Vec<Tensor> = params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect();
            for (slot, (value, grads)) in results.iter().enumerate() {
                if !value.is_finite() {
                    return Err(TrainingError::NonFiniteObjective {
                        epoch,
                        batch: batch_index,
                        sample: batch[slot],
                    });
                }
                train_wsr_sum += value;
                for (acc, g) in batch_grads.iter_mut().zip(grads) {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
            }
            // the minibatch objective is the sum over samples
            adam_step(
                params.tensors_mut(),
                &batch_grads,
                &mut adam,
                cfg.learning_rate,
                true,
            )?;
        }

        let test_scores: Vec<f64> = pool.install(|| {
            test.samples
                .par_iter()
                .zip(prepared_test.features.par_iter())
                .map(|(sample, features)| {
                    evaluate_sample(
                        sample,
                        features,
                        &params,
                        prepared_test.input_grid,
                        &wmmse_cfg,
                    )
                    .map(|eval| eval.wsr)
                })
                .collect::<Result<Vec<_>, TrainingError>>()
        })?;
        let test_wsr = test_scores.iter().sum::<f64>() / test_scores.len() as f64;

        epochs.push(EpochRecord {
            epoch,
            train_wsr: train_wsr_sum / train.samples.len() as f64,
            test_wsr,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok(TrainOutcome {
        params,
        record: RunRecord {
            seed: cfg.seed,
            epochs,
        },
    })
}

/// Evaluate trained parameters on a dataset with fresh WMMSE precoders.
pub fn evaluate(
    params: &NetworkParams,
    dataset: &Dataset,
    csi_mode: CsiMode,
    threads: usize,
) -> Result<EvalStats, TrainingError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool construction");
    let prepared = prepare_inputs(dataset, params.specs(), csi_mode)?;
    let wmmse_cfg = WmmseConfig::default();
    let per_sample: Vec<f64> = pool.install(|| {
        dataset
            .samples
            .par_iter()
            .zip(prepared.features.par_iter())
            .map(|(sample, features)| {
                evaluate_sample(sample, features, params, prepared.input_grid, &wmmse_cfg)
                    .map(|eval| eval.wsr)
            })
            .collect::<Result<Vec<_>, TrainingError>>()
    })?;
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    let var = per_sample
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / per_sample.len() as f64;
    Ok(EvalStats {
        mean_wsr: mean,
        std_wsr: var.sqrt(),
        per_sample,
    })
}
