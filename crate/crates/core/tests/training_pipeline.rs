//! End-to-end pipeline properties: gradient correctness against central
//! finite differences, training/evaluation consistency, determinism, and
//! seeded sanity runs of the alternating-optimization loop.

use riswsr_core::autodiff::Tape;
use riswsr_core::channel::{
    cascaded_channel, compute_features, CascadeMode, ChannelGenConfig, GeometryConfig, Regime,
};
use riswsr_core::precoding::{wmmse_precoder, wsr_objective, WmmseConfig};
use riswsr_core::risnet::{forward, init_params, LayerSpec, PhaseConfiguration};
use riswsr_core::training::{
    build_dataset, direct_objective_value, evaluate, sample_wsr_tape, tape_objective_value,
    train_ao, CsiMode, TrainConfig,
};

fn tiny_geometry(rows: usize, cols: usize) -> GeometryConfig {
    GeometryConfig {
        ris_rows: rows,
        ris_cols: cols,
        ..Default::default()
    }
}

fn one_hidden_layer_specs() -> Vec<LayerSpec> {
    vec![LayerSpec::normal(5, 16), LayerSpec::final_layer(64)]
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let geometry = tiny_geometry(3, 3);
    let (train, _) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        1,
        1,
        4242,
        10.0,
    )
    .unwrap();
    let sample = &train.samples[0];
    let features = compute_features(sample, None, &train.stats).unwrap();
    let params = init_params(&one_hidden_layer_specs(), 11).unwrap();

    // fixed precoder from the current phases
    let phases = forward(&features, &params, (3, 3)).unwrap();
    let channel = cascaded_channel(sample, &phases, CascadeMode::ClosedForm).unwrap();
    let precoder = wmmse_precoder(
        &channel,
        &sample.weights,
        sample.noise_power,
        sample.power_budget,
        &WmmseConfig::default(),
    )
    .unwrap()
    .precoder;

    let mut tape = Tape::new();
    let node = sample_wsr_tape(&mut tape, sample, &features, &precoder, &params, (3, 3)).unwrap();
    let analytic = tape.backward(node).unwrap();

    let step = 1e-5;
    let mut max_rel = 0.0f64;
    let mut worst = (0usize, 0usize);
    for (ti, tensor) in params.tensors().iter().enumerate() {
        for ci in 0..tensor.numel() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data_mut()[ci] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data_mut()[ci] -= step;
            let f_plus = tape_objective_value(sample, &features, &precoder, &plus, (3, 3)).unwrap();
            let f_minus =
                tape_objective_value(sample, &features, &precoder, &minus, (3, 3)).unwrap();
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = analytic[ti].data()[ci];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            if rel > max_rel {
                max_rel = rel;
                worst = (ti, ci);
            }
        }
    }
    assert!(
        max_rel < 1e-4,
        "max relative gradient error {max_rel} at tensor {} coordinate {}",
        worst.0,
        worst.1
    );
}

#[test]
fn tape_and_direct_objective_agree() {
    let geometry = tiny_geometry(4, 4);
    let (train, _) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        4,
        1,
        77,
        10.0,
    )
    .unwrap();
    let params = init_params(&one_hidden_layer_specs(), 5).unwrap();
    for sample in &train.samples {
        let features = compute_features(sample, None, &train.stats).unwrap();
        let phases = forward(&features, &params, (4, 4)).unwrap();
        let channel = cascaded_channel(sample, &phases, CascadeMode::ClosedForm).unwrap();
        let precoder = wmmse_precoder(
            &channel,
            &sample.weights,
            sample.noise_power,
            sample.power_budget,
            &WmmseConfig::default(),
        )
        .unwrap()
        .precoder;
        let on_tape = tape_objective_value(sample, &features, &precoder, &params, (4, 4)).unwrap();
        let direct = direct_objective_value(sample, &features, &precoder, &params, (4, 4)).unwrap();
        let rel = (on_tape - direct).abs() / direct.abs().max(1e-12);
        assert!(rel <= 1e-10, "tape {on_tape} vs direct {direct}");
    }
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let geometry = tiny_geometry(3, 3);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        2,
        1,
        9,
        10.0,
    )
    .unwrap();
    let specs = one_hidden_layer_specs();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        learning_rate: 0.0,
        seed: 5,
        ..Default::default()
    };
    let outcome = train_ao(&train, &test, &specs, &cfg).unwrap();
    let fresh = init_params(&specs, riswsr_core::channel::derive_seed(cfg.seed, 0x1217)).unwrap();
    assert_eq!(outcome.params, fresh);
}

#[test]
fn singleton_training_improves_the_objective() {
    let geometry = tiny_geometry(3, 3);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        1,
        1,
        31,
        10.0,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        batch_size: 1,
        learning_rate: 1e-3,
        seed: 3,
        ..Default::default()
    };
    let outcome = train_ao(&train, &test, &one_hidden_layer_specs(), &cfg).unwrap();
    let first = outcome.record.epochs.first().unwrap().train_wsr;
    let last = outcome.record.epochs.last().unwrap().train_wsr;
    assert!(
        last > first,
        "training did not improve: first {first}, last {last}"
    );
}

#[test]
fn same_seed_reproduces_the_record_bit_for_bit() {
    let geometry = tiny_geometry(3, 3);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        4,
        2,
        55,
        10.0,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 2,
        seed: 21,
        ..Default::default()
    };
    let a = train_ao(&train, &test, &one_hidden_layer_specs(), &cfg).unwrap();
    let b = train_ao(&train, &test, &one_hidden_layer_specs(), &cfg).unwrap();
    assert_eq!(a.params, b.params);
    for (ea, eb) in a.record.epochs.iter().zip(&b.record.epochs) {
        assert!(ea.train_wsr.to_bits() == eb.train_wsr.to_bits());
        assert!(ea.test_wsr.to_bits() == eb.test_wsr.to_bits());
    }
}

#[test]
fn results_are_independent_of_thread_count() {
    let geometry = tiny_geometry(3, 3);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        4,
        2,
        56,
        10.0,
    )
    .unwrap();
    let base = TrainConfig {
        epochs: 3,
        batch_size: 2,
        seed: 22,
        ..Default::default()
    };
    let single = train_ao(&train, &test, &one_hidden_layer_specs(), &base).unwrap();
    let threaded_cfg = TrainConfig { threads: 2, ..base };
    let threaded = train_ao(&train, &test, &one_hidden_layer_specs(), &threaded_cfg).unwrap();
    assert_eq!(single.params, threaded.params);
    for (ea, eb) in single.record.epochs.iter().zip(&threaded.record.epochs) {
        assert!(ea.train_wsr.to_bits() == eb.train_wsr.to_bits());
        assert!(ea.test_wsr.to_bits() == eb.test_wsr.to_bits());
    }
}

#[test]
fn frozen_precoders_keep_training_stable() {
    // with the precoders never refreshed, the 10-epoch moving average of
    // the train WSR must not drop by more than 5%
    let geometry = tiny_geometry(4, 4);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        8,
        2,
        91,
        10.0,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 8,
        learning_rate: 1e-3,
        precoder_refresh_every: 0,
        seed: 7,
        ..Default::default()
    };
    let outcome = train_ao(&train, &test, &one_hidden_layer_specs(), &cfg).unwrap();
    let values: Vec<f64> = outcome.record.epochs.iter().map(|e| e.train_wsr).collect();
    let window = 10;
    let averages: Vec<f64> = values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    let mut peak = averages[0];
    for &avg in &averages {
        assert!(
            avg >= peak * 0.95,
            "moving average dropped from {peak} to {avg}"
        );
        peak = peak.max(avg);
    }
}

#[test]
fn evaluation_is_invariant_to_user_permutation() {
    let geometry = GeometryConfig {
        ris_rows: 3,
        ris_cols: 3,
        users: 3,
        ..Default::default()
    };
    let (train, _) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        4,
        1,
        13,
        10.0,
    )
    .unwrap();
    let params = init_params(&one_hidden_layer_specs(), 2).unwrap();

    let mut permuted = train.clone();
    let perm = [2usize, 0, 1];
    for sample in permuted.samples.iter_mut() {
        let g = sample.g.clone();
        let d = sample.d.clone();
        let w = sample.weights.clone();
        for (new_row, &src) in perm.iter().enumerate() {
            for j in 0..g.cols() {
                sample.g[(new_row, j)] = g[(src, j)];
            }
            for j in 0..d.cols() {
                sample.d[(new_row, j)] = d[(src, j)];
            }
            sample.weights[new_row] = w[src];
        }
    }

    let base = evaluate(&params, &train, CsiMode::Full, 1).unwrap();
    let swapped = evaluate(&params, &permuted, CsiMode::Full, 1).unwrap();
    for (a, b) in base.per_sample.iter().zip(&swapped.per_sample) {
        assert!((a - b).abs() <= 1e-9, "per-sample WSR changed: {a} vs {b}");
    }
}

#[test]
fn zero_network_matches_identity_phase_evaluation() {
    let geometry = tiny_geometry(3, 3);
    let (train, _) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        3,
        1,
        17,
        10.0,
    )
    .unwrap();
    let specs = one_hidden_layer_specs();
    let template = init_params(&specs, 0).unwrap();
    let zeroed = riswsr_core::risnet::NetworkParams::from_tensors(
        template.specs().to_vec(),
        template
            .tensors()
            .iter()
            .map(|t| riswsr_core::autodiff::Tensor::zeros(t.shape()))
            .collect(),
    )
    .unwrap();

    let stats = evaluate(&zeroed, &train, CsiMode::Full, 1).unwrap();
    for (sample, &wsr) in train.samples.iter().zip(&stats.per_sample) {
        let identity = PhaseConfiguration::new(vec![0.0; 9]).unwrap();
        let c = cascaded_channel(sample, &identity, CascadeMode::ClosedForm).unwrap();
        let v = wmmse_precoder(
            &c,
            &sample.weights,
            sample.noise_power,
            sample.power_budget,
            &WmmseConfig::default(),
        )
        .unwrap()
        .precoder;
        let expected = wsr_objective(&c, &v, sample.noise_power, &sample.weights).unwrap();
        assert!((wsr - expected).abs() <= 1e-12);
    }
}

#[test]
fn partial_mode_trains_through_expansions() {
    // 2x2 anchors with two expansion layers on an 18x18 grid is the partial
    // default; use one expansion on a 6x6 grid to keep this quick
    let geometry = tiny_geometry(6, 6);
    let (train, test) = build_dataset(
        &geometry,
        Regime::Deterministic,
        &ChannelGenConfig::default(),
        2,
        1,
        23,
        10.0,
    )
    .unwrap();
    let specs = vec![
        LayerSpec::normal(5, 8),
        LayerSpec::expansion(32, 8),
        LayerSpec::final_layer(32),
    ];
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 2,
        seed: 2,
        csi_mode: CsiMode::Partial {
            anchor_rows: 2,
            anchor_cols: 2,
        },
        ..Default::default()
    };
    let outcome = train_ao(&train, &test, &specs, &cfg).unwrap();
    assert_eq!(outcome.record.epochs.len(), 2);
    assert!(outcome.record.epochs.iter().all(|e| e.test_wsr.is_finite()));
}
