//! Command implementations: dataset generation, training, evaluation,
//! baselines and the validation sweep.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use riswsr_core::channel::{
    cascaded_channel, derive_seed, load_dataset_dir, save_dataset_dir, CascadeMode,
    DatasetManifest, DATASET_FORMAT,
};
use riswsr_core::precoding::{random_phase_baseline, wmmse_precoder, wsr_objective, WmmseConfig};
use riswsr_core::risnet::{load_checkpoint, save_checkpoint, PhaseConfiguration};
use riswsr_core::training::{build_dataset, evaluate, train_ao, Dataset, Split};
use riswsr_core::validation::run_all;

use crate::config::{write_echo, RunConfig};
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Mark a directory as holding partial outputs from a failed run.
pub fn mark_incomplete(out_dir: &Path, error: &str) {
    let _ = std::fs::write(out_dir.join("INCOMPLETE"), error);
}

fn manifest_for(cfg: &RunConfig, dataset: &Dataset) -> DatasetManifest {
    DatasetManifest {
        format: DATASET_FORMAT.into(),
        geometry: dataset.geometry.clone(),
        regime: dataset.regime,
        split: dataset.split.tag().into(),
        master_seed: dataset.master_seed,
        count: dataset.samples.len(),
        gen: cfg.channel.clone(),
        noise_power: dataset.samples[0].noise_power,
        power_budget: dataset.samples[0].power_budget,
        stats: dataset.stats,
        sample_seeds: dataset.samples.iter().map(|s| s.seed).collect(),
    }
}

fn dataset_from_dir(dir: &Path, split: Split) -> Result<Dataset, CliError> {
    let (manifest, samples) = load_dataset_dir(dir).map_err(runtime)?;
    if manifest.split != split.tag() {
        return Err(CliError::Runtime(format!(
            "{} holds the {:?} split, expected {}",
            dir.display(),
            manifest.split,
            split.tag()
        )));
    }
    Ok(Dataset {
        samples,
        split,
        stats: manifest.stats,
        geometry: manifest.geometry,
        regime: manifest.regime,
        master_seed: manifest.master_seed,
    })
}

fn load_archive_pair(cfg: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    let base = cfg.dataset_dir.as_ref().ok_or_else(|| {
        CliError::Config("this command needs dataset_dir pointing at a generated dataset".into())
    })?;
    let train = dataset_from_dir(&base.join("train"), Split::Train)?;
    let test = dataset_from_dir(&base.join("test"), Split::Test)?;
    if train.geometry != cfg.geometry {
        return Err(CliError::Config(
            "dataset geometry does not match the configuration".into(),
        ));
    }
    Ok((train, test))
}

/// `generate`: build both splits and write them as archives.
pub fn generate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write_echo(out, cfg)?;
    let (train, test) = build_dataset(
        &cfg.geometry,
        cfg.regime,
        &cfg.channel,
        cfg.dataset.train_size,
        cfg.dataset.test_size,
        cfg.seed,
        cfg.snr_db,
    )
    .map_err(runtime)?;
    save_dataset_dir(
        &out.join("train"),
        &manifest_for(cfg, &train),
        &train.samples,
    )
    .map_err(runtime)?;
    save_dataset_dir(&out.join("test"), &manifest_for(cfg, &test), &test.samples)
        .map_err(runtime)?;
    println!(
        "generated {} train and {} test samples into {}",
        train.samples.len(),
        test.samples.len(),
        out.display()
    );
    Ok(())
}

/// `train`: run the alternating-optimization loop on an archived dataset.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write_echo(out, cfg)?;
    let (train_set, test_set) = load_archive_pair(cfg)?;
    let specs = cfg.specs();
    let outcome = train_ao(&train_set, &test_set, &specs, &cfg.train).map_err(runtime)?;
    save_checkpoint(&out.join("checkpoint"), &outcome.params, Some(cfg.seed)).map_err(runtime)?;
    outcome
        .record
        .write_csv(&out.join("run_record.csv"))
        .map_err(runtime)?;
    outcome
        .record
        .write_json(&out.join("run_record.json"))
        .map_err(runtime)?;
    if let Some(last) = outcome.record.epochs.last() {
        println!(
            "trained {} epochs: final train WSR {:.4}, test WSR {:.4}",
            outcome.record.epochs.len(),
            last.train_wsr,
            last.test_wsr
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationArtifact {
    mean_wsr: f64,
    std_wsr: f64,
    per_sample: Vec<f64>,
}

/// `evaluate`: score a checkpoint on the archived test split.
pub fn evaluate_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write_echo(out, cfg)?;
    let checkpoint_dir = cfg.checkpoint_dir.as_ref().ok_or_else(|| {
        CliError::Config("evaluate needs checkpoint_dir pointing at a trained model".into())
    })?;
    let (_, test_set) = load_archive_pair(cfg)?;
    let (params, _) = load_checkpoint(checkpoint_dir).map_err(runtime)?;
    let stats =
        evaluate(&params, &test_set, cfg.train.csi_mode, cfg.train.threads).map_err(runtime)?;

    let artifact = EvaluationArtifact {
        mean_wsr: stats.mean_wsr,
        std_wsr: stats.std_wsr,
        per_sample: stats.per_sample.clone(),
    };
    std::fs::write(
        out.join("evaluation.json"),
        serde_json::to_string_pretty(&artifact).map_err(runtime)?,
    )
    .map_err(runtime)?;
    let mut csv = std::fs::File::create(out.join("evaluation.csv")).map_err(runtime)?;
    writeln!(csv, "sample,wsr").map_err(runtime)?;
    for (i, wsr) in stats.per_sample.iter().enumerate() {
        writeln!(csv, "{i},{wsr:.17e}").map_err(runtime)?;
    }
    println!(
        "evaluated {} samples: mean WSR {:.4} (std {:.4})",
        stats.per_sample.len(),
        stats.mean_wsr,
        stats.std_wsr
    );
    Ok(())
}

#[derive(Serialize)]
struct BaselineArtifact {
    random_phase_mean_wsr: f64,
    identity_phase_mean_wsr: f64,
    random_phase_per_sample: Vec<f64>,
    identity_phase_per_sample: Vec<f64>,
}

/// `baselines`: random-phase and identity-phase WSR under WMMSE.
pub fn baselines(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write_echo(out, cfg)?;
    let (_, test_set) = load_archive_pair(cfg)?;
    let n = test_set.geometry.ris_elements();
    let wmmse_cfg = WmmseConfig::default();

    let score = |phases: &PhaseConfiguration, sample: &riswsr_core::channel::ChannelSample| {
        let c = cascaded_channel(sample, phases, CascadeMode::ClosedForm).map_err(runtime)?;
        let v = wmmse_precoder(
            &c,
            &sample.weights,
            sample.noise_power,
            sample.power_budget,
            &wmmse_cfg,
        )
        .map_err(runtime)?
        .precoder;
        wsr_objective(&c, &v, sample.noise_power, &sample.weights).map_err(runtime)
    };

    let identity = PhaseConfiguration::new(vec![0.0; n]).map_err(runtime)?;
    let mut random_scores = Vec::with_capacity(test_set.samples.len());
    let mut identity_scores = Vec::with_capacity(test_set.samples.len());
    for (i, sample) in test_set.samples.iter().enumerate() {
        let phases = random_phase_baseline(n, derive_seed(cfg.seed, 0xba5e + i as u64));
        random_scores.push(score(&phases, sample)?);
        identity_scores.push(score(&identity, sample)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let artifact = BaselineArtifact {
        random_phase_mean_wsr: mean(&random_scores),
        identity_phase_mean_wsr: mean(&identity_scores),
        random_phase_per_sample: random_scores.clone(),
        identity_phase_per_sample: identity_scores.clone(),
    };
    std::fs::write(
        out.join("baselines.json"),
        serde_json::to_string_pretty(&artifact).map_err(runtime)?,
    )
    .map_err(runtime)?;
    let mut csv = std::fs::File::create(out.join("baselines.csv")).map_err(runtime)?;
    writeln!(csv, "sample,random_phase_wsr,identity_phase_wsr").map_err(runtime)?;
    for i in 0..random_scores.len() {
        writeln!(
            csv,
            "{i},{:.17e},{:.17e}",
            random_scores[i], identity_scores[i]
        )
        .map_err(runtime)?;
    }
    println!(
        "baselines over {} samples: random {:.4}, identity {:.4}",
        random_scores.len(),
        artifact.random_phase_mean_wsr,
        artifact.identity_phase_mean_wsr
    );
    Ok(())
}

/// `validate`: run the property sweep; returns whether everything passed.
pub fn validate(cfg: &RunConfig) -> Result<bool, CliError> {
    let reports = run_all(cfg.seed);
    let mut all_passed = true;
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<38} {}", report.name, report.detail);
        all_passed &= report.passed;
    }
    println!(
        "{} of {} properties passed",
        reports.iter().filter(|r| r.passed).count(),
        reports.len()
    );
    Ok(all_passed)
}
