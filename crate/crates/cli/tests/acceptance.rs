//! Acceptance suite: one test per criterion, each printing its pass line
//! with the measured figure. The desk-scale deterministic training run is
//! shared between the training and ordering criteria through a lazy cell.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riswsr_core::autodiff::Tape;
use riswsr_core::channel::{
    cascaded_channel, compute_features, derive_seed, generate_channels, oracle_channel_general,
    CascadeMode, ChannelGenConfig, ChannelSample, FeatureTensor, GeometryConfig, Regime,
};
use riswsr_core::linalg::{spectral_norm, ComplexMatrix};
use riswsr_core::precoding::{random_phase_baseline, wmmse_precoder, wsr_objective, WmmseConfig};
use riswsr_core::risnet::{
    forward, full_csi_default_specs, init_params, layer_forward, partial_csi_default_specs,
    LayerMode, LayerSpec, PhaseConfiguration,
};
use riswsr_core::training::{
    build_dataset, sample_wsr_tape, tape_objective_value, train_ao, CsiMode, Dataset, TrainConfig,
    TrainOutcome,
};

const MASTER_SEED: u64 = 7240;

fn rel_err(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn random_phases(n: usize, seed: u64) -> PhaseConfiguration {
    random_phase_baseline(n, seed)
}

fn oracle_instances(grid: usize, count: usize, seed: u64) -> Vec<ChannelSample> {
    let geometry = GeometryConfig {
        ris_rows: grid,
        ris_cols: grid,
        ..Default::default()
    };
    let gen = ChannelGenConfig {
        coupling: 0.5,
        ..Default::default()
    };
    generate_channels(&geometry, Regime::Deterministic, count, seed, &gen).unwrap()
}

fn scale_links(sample: &ChannelSample, target_norm: f64) -> ChannelSample {
    let mut scaled = sample.clone();
    let shrink = |m: &ComplexMatrix| {
        let factor = target_norm / spectral_norm(m, 100);
        m.scale(Complex64::new(factor, 0.0))
    };
    scaled.h = shrink(&sample.h);
    scaled.g = shrink(&sample.g);
    scaled.d = shrink(&sample.d);
    scaled
}

#[test]
fn criterion_01_channel_oracle_equivalence() {
    let started = Instant::now();
    let mut checked = 0usize;
    let mut worst_second_order = 0.0f64;
    let mut worst_closed_form = 0.0f64;
    for (grid, count) in [(2usize, 17usize), (4, 17), (6, 16)] {
        let samples = oracle_instances(grid, count, 0xc1 + grid as u64);
        for (i, sample) in samples.iter().enumerate() {
            let n = grid * grid;
            assert!(spectral_norm(&sample.s_ii, 200) < 0.9);
            let phi = random_phases(n, derive_seed(0xc1f, (grid * 100 + i) as u64));

            let oracle = oracle_channel_general(sample, &phi).unwrap();
            let second = cascaded_channel(sample, &phi, CascadeMode::WithSecondOrder).unwrap();
            worst_second_order = worst_second_order.max(rel_err(&second, &oracle));

            let small = scale_links(sample, 1e-3);
            let oracle_small = oracle_channel_general(&small, &phi).unwrap();
            let closed = cascaded_channel(&small, &phi, CascadeMode::ClosedForm).unwrap();
            worst_closed_form = worst_closed_form.max(rel_err(&closed, &oracle_small));
            checked += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(checked, 50);
    assert!(
        worst_second_order <= 1e-8,
        "second-order vs oracle: {worst_second_order:.3e}"
    );
    assert!(
        worst_closed_form <= 1e-5,
        "closed form vs oracle at small gains: {worst_closed_form:.3e}"
    );
    assert!(elapsed < 10.0, "runtime {elapsed:.1} s exceeds 10 s");
    println!(
        "criterion 01 channel oracle equivalence: PASS \
         (second-order {worst_second_order:.2e} <= 1e-8, closed-form {worst_closed_form:.2e} <= 1e-5, {elapsed:.1} s)"
    );
}

#[test]
fn criterion_02_no_coupling_reduction() {
    let mut worst = 0.0f64;
    for (i, sample) in oracle_instances(3, 10, 0xc2).iter().enumerate() {
        let mut decoupled = scale_links(sample, 3e-7);
        decoupled.s_ii = ComplexMatrix::zeros(9, 9);
        let phi = random_phases(9, derive_seed(0xc2f, i as u64));
        let reduced = cascaded_channel(&decoupled, &phi, CascadeMode::NoCoupling).unwrap();
        for mode in [CascadeMode::ClosedForm, CascadeMode::WithSecondOrder] {
            let c = cascaded_channel(&decoupled, &phi, mode).unwrap();
            worst = worst.max(rel_err(&c, &reduced));
        }
    }
    assert!(worst <= 1e-12, "no-coupling reduction error {worst:.3e}");
    println!("criterion 02 no-coupling reduction: PASS (max deviation {worst:.2e} <= 1e-12)");
}

#[test]
fn criterion_03_loop_tensor_equality() {
    let started = Instant::now();
    let mut cases = 0usize;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc3);
    'outer: for &p in &[4usize, 16] {
        for &q in &[4usize, 16] {
            for &n in &[9usize, 81] {
                for &u in &[2usize, 4] {
                    if cases >= 20 {
                        break 'outer;
                    }
                    let specs = vec![LayerSpec::normal(p, q), LayerSpec::final_layer(4 * q)];
                    let params = init_params(&specs, rng.random()).unwrap();
                    let data: Vec<f64> = (0..p * n * u)
                        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                        .collect();
                    let input = FeatureTensor::from_vec(p, n, u, data);
                    let looped = layer_forward(&input, &params, 0, LayerMode::Loop).unwrap();
                    let tensored = layer_forward(&input, &params, 0, LayerMode::Tensor).unwrap();
                    let diff = looped
                        .data()
                        .iter()
                        .zip(tensored.data())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    worst = worst.max(diff);
                    cases += 1;
                }
            }
        }
    }
    // cycle extra shape draws up to 20 layers total
    while cases < 20 {
        let specs = vec![LayerSpec::normal(16, 16), LayerSpec::final_layer(64)];
        let params = init_params(&specs, rng.random()).unwrap();
        let data: Vec<f64> = (0..16 * 81 * 4)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let input = FeatureTensor::from_vec(16, 81, 4, data);
        let looped = layer_forward(&input, &params, 0, LayerMode::Loop).unwrap();
        let tensored = layer_forward(&input, &params, 0, LayerMode::Tensor).unwrap();
        let diff = looped
            .data()
            .iter()
            .zip(tensored.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
        cases += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(cases >= 20);
    assert!(worst <= 1e-10, "loop vs tensor deviation {worst:.3e}");
    assert!(elapsed < 5.0, "runtime {elapsed:.1} s exceeds 5 s");
    println!(
        "criterion 03 loop/tensor equality: PASS ({cases} layers, max deviation {worst:.2e} <= 1e-10, {elapsed:.1} s)"
    );
}

#[test]
fn criterion_04_permutation_invariance() {
    let started = Instant::now();
    let users = 4usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4);
    let mut random_perm = |u: usize| -> Vec<usize> {
        let mut perm: Vec<usize> = (0..u).collect();
        for i in (1..u).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        perm
    };

    // per-layer equivariance
    let specs = vec![LayerSpec::normal(5, 16), LayerSpec::final_layer(64)];
    let layer_params = init_params(&specs, 0xc41).unwrap();
    let mut worst_equivariance = 0.0f64;
    for trial in 0..10u64 {
        let data: Vec<f64> = (0..5 * 36 * users)
            .map(|i| ((i as f64) * 0.311 + trial as f64).sin())
            .collect();
        let input = FeatureTensor::from_vec(5, 36, users, data);
        let perm = random_perm(users);
        let base = layer_forward(&input, &layer_params, 0, LayerMode::Tensor).unwrap();
        let permuted = layer_forward(
            &input.permute_users(&perm),
            &layer_params,
            0,
            LayerMode::Tensor,
        )
        .unwrap();
        let expected = base.permute_users(&perm);
        let diff = permuted
            .data()
            .iter()
            .zip(expected.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_equivariance = worst_equivariance.max(diff);
    }
    assert!(
        worst_equivariance <= 1e-12,
        "per-layer equivariance {worst_equivariance:.3e}"
    );

    // end-to-end invariance for both default networks
    let mut worst_invariance = 0.0f64;
    for (net_params, elements, grid) in [
        (
            init_params(&full_csi_default_specs(5), 0xc42).unwrap(),
            36usize,
            (6usize, 6usize),
        ),
        (
            init_params(&partial_csi_default_specs(5), 0xc43).unwrap(),
            4,
            (2, 2),
        ),
    ] {
        for sample_idx in 0..10u64 {
            let data: Vec<f64> = (0..5 * elements * users)
                .map(|i| ((i as f64) * 0.173 + sample_idx as f64 * 0.71).cos())
                .collect();
            let input = FeatureTensor::from_vec(5, elements, users, data);
            let base = forward(&input, &net_params, grid).unwrap();
            for _ in 0..20 {
                let perm = random_perm(users);
                let permuted = forward(&input.permute_users(&perm), &net_params, grid).unwrap();
                let diff = base
                    .phases()
                    .iter()
                    .zip(permuted.phases())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst_invariance = worst_invariance.max(diff);
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        worst_invariance <= 1e-9,
        "end-to-end invariance {worst_invariance:.3e}"
    );
    assert!(elapsed < 10.0, "runtime {elapsed:.1} s exceeds 10 s");
    println!(
        "criterion 04 permutation invariance: PASS \
         (equivariance {worst_equivariance:.2e} <= 1e-12, invariance {worst_invariance:.2e} <= 1e-9, {elapsed:.1} s)"
    );
}

#[test]
fn criterion_05_gradient_correctness() {
    let started = Instant::now();
    let geometry = GeometryConfig {
        ris_rows: 3,
        ris_cols: 3,
        ..Default::default()
    };
    let (train, _) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        1,
        1,
        0xc5,
        10.0,
    )
    .unwrap();
    let sample = &train.samples[0];
    let features = compute_features(sample, None, &train.stats).unwrap();
    let specs = vec![LayerSpec::normal(5, 16), LayerSpec::final_layer(64)];
    let params = init_params(&specs, 0xc51).unwrap();
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
    let mut worst = 0.0f64;
    let mut total = 0usize;
    for (ti, tensor) in params.tensors().iter().enumerate() {
        for ci in 0..tensor.numel() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data_mut()[ci] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data_mut()[ci] -= step;
            let fp = tape_objective_value(sample, &features, &precoder, &plus, (3, 3)).unwrap();
            let fm = tape_objective_value(sample, &features, &precoder, &minus, (3, 3)).unwrap();
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic[ti].data()[ci];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12));
            total += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst < 1e-4, "max relative gradient error {worst:.3e}");
    assert!(elapsed < 30.0, "runtime {elapsed:.1} s exceeds 30 s");
    println!(
        "criterion 05 gradient correctness: PASS ({total} parameters, max relative error {worst:.2e} < 1e-4, {elapsed:.1} s)"
    );
}

#[test]
fn criterion_06_constraint_satisfaction() {
    let mut worst_modulus = 0.0f64;
    let mut worst_power_excess = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc6);

    // phases from random draws and from both default networks
    let mut phase_sets: Vec<PhaseConfiguration> =
        (0..5).map(|i| random_phases(36, 0xc60 + i)).collect();
    let full = init_params(&full_csi_default_specs(5), 0xc61).unwrap();
    let data: Vec<f64> = (0..5 * 36 * 2).map(|_| rng.random::<f64>() - 0.5).collect();
    phase_sets.push(forward(&FeatureTensor::from_vec(5, 36, 2, data), &full, (6, 6)).unwrap());
    let partial = init_params(&partial_csi_default_specs(5), 0xc62).unwrap();
    let data: Vec<f64> = (0..5 * 4 * 2).map(|_| rng.random::<f64>() - 0.5).collect();
    phase_sets.push(forward(&FeatureTensor::from_vec(5, 4, 2, data), &partial, (2, 2)).unwrap());

    for phases in &phase_sets {
        let phi = phases.phi();
        for i in 0..phi.rows() {
            for j in 0..phi.cols() {
                if i == j {
                    worst_modulus = worst_modulus.max((phi[(i, j)].norm() - 1.0).abs());
                } else {
                    assert_eq!(
                        phi[(i, j)],
                        Complex64::new(0.0, 0.0),
                        "off-diagonal entry not exactly zero"
                    );
                }
            }
        }
    }

    for seed in 0..30u64 {
        let users = 2 + (seed % 3) as usize;
        let c = ComplexMatrix::from_fn(users, 4, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let raw: Vec<f64> = (0..users).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let budget = 0.5 + rng.random::<f64>();
        let outcome = wmmse_precoder(&c, &weights, 0.1, budget, &WmmseConfig::default()).unwrap();
        worst_power_excess = worst_power_excess.max(outcome.precoder.transmit_power() - budget);
    }

    assert!(
        worst_modulus <= 1e-15,
        "unit-modulus gap {worst_modulus:.3e}"
    );
    assert!(
        worst_power_excess <= 1e-9,
        "power budget exceeded by {worst_power_excess:.3e}"
    );
    println!(
        "criterion 06 constraint satisfaction: PASS \
         (modulus gap {worst_modulus:.2e} <= 1e-15, off-diagonals exactly zero, power excess {worst_power_excess:.2e} <= 1e-9)"
    );
}

#[test]
fn criterion_07_wmmse_behavior() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc7);
    let mut worst_drop = 0.0f64;
    let mut worst_power_gap = 0.0f64;
    for _ in 0..100 {
        let users = 2 + rng.random_range(0..3usize);
        let antennas = 4;
        let c = ComplexMatrix::from_fn(users, antennas, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let raw: Vec<f64> = (0..users).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let outcome = wmmse_precoder(&c, &weights, 0.05, 1.0, &WmmseConfig::default()).unwrap();
        for pair in outcome.wsr_trace.windows(2) {
            worst_drop = worst_drop.max(pair[0] - pair[1]);
        }
        // low noise keeps the power constraint active
        worst_power_gap = worst_power_gap.max((1.0 - outcome.precoder.transmit_power()).abs());
    }

    // single-user closed form with a tight bisection
    let c = ComplexMatrix::from_fn(1, 4, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let tight = WmmseConfig {
        bisection_tol: 1e-13,
        rel_tol: 1e-12,
        max_iters: 300,
        ..WmmseConfig::default()
    };
    let outcome = wmmse_precoder(&c, &[1.0], 0.25, 1.5, &tight).unwrap();
    let capacity = (1.0 + 1.5 * c.gram_trace() / 0.25).log2();
    let capacity_gap = (outcome.wsr_trace.last().unwrap() - capacity).abs();

    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst_drop <= 1e-9, "WSR dropped by {worst_drop:.3e}");
    assert!(
        worst_power_gap <= 1e-8,
        "bisection power gap {worst_power_gap:.3e}"
    );
    assert!(
        capacity_gap <= 1e-9,
        "single-user capacity gap {capacity_gap:.3e}"
    );
    assert!(elapsed < 30.0, "runtime {elapsed:.1} s exceeds 30 s");
    println!(
        "criterion 07 WMMSE behavior: PASS \
         (monotone within {worst_drop:.2e}, power gap {worst_power_gap:.2e} <= 1e-8, capacity gap {capacity_gap:.2e} <= 1e-9, {elapsed:.1} s)"
    );
}

struct DeskDeterministic {
    train: Dataset,
    test: Dataset,
    baseline_wsr: f64,
    full_run: TrainOutcome,
    /// Dataset build plus single-threaded training time.
    seconds: f64,
}

fn desk_deterministic() -> &'static DeskDeterministic {
    static CELL: OnceLock<DeskDeterministic> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let geometry = GeometryConfig::default();
        let (train, test) = build_dataset(
            &geometry,
            Regime::Deterministic,
            &ChannelGenConfig::default(),
            256,
            64,
            MASTER_SEED,
            10.0,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 16,
            batch_size: 64,
            learning_rate: 1e-3,
            precoder_refresh_every: 1,
            seed: MASTER_SEED,
            csi_mode: CsiMode::Full,
            threads: 1,
        };
        let full_run = train_ao(&train, &test, &full_csi_default_specs(5), &cfg).unwrap();
        let seconds = started.elapsed().as_secs_f64();
        let baseline_wsr = baseline_mean(&test);
        DeskDeterministic {
            train,
            test,
            baseline_wsr,
            full_run,
            seconds,
        }
    })
}

fn baseline_mean(test: &Dataset) -> f64 {
    let n = test.geometry.ris_elements();
    let wmmse_cfg = WmmseConfig::default();
    let mut sum = 0.0;
    for (i, sample) in test.samples.iter().enumerate() {
        let phases = random_phases(n, derive_seed(MASTER_SEED, 0xba5e + i as u64));
        let c = cascaded_channel(sample, &phases, CascadeMode::ClosedForm).unwrap();
        let v = wmmse_precoder(
            &c,
            &sample.weights,
            sample.noise_power,
            sample.power_budget,
            &wmmse_cfg,
        )
        .unwrap()
        .precoder;
        sum += wsr_objective(&c, &v, sample.noise_power, &sample.weights).unwrap();
    }
    sum / test.samples.len() as f64
}

#[test]
fn criterion_08_desk_scale_training() {
    let desk = desk_deterministic();
    let final_test = desk.full_run.record.final_test_wsr().unwrap();
    let ratio = final_test / desk.baseline_wsr;
    assert!(
        desk.full_run.record.epochs.len() <= 500,
        "epoch budget exceeded"
    );
    assert!(
        ratio >= 1.2,
        "trained test WSR {final_test:.4} is only {ratio:.3}x the baseline {:.4}",
        desk.baseline_wsr
    );
    assert!(
        desk.seconds <= 600.0,
        "single-threaded run took {:.0} s (budget 600 s)",
        desk.seconds
    );
    println!(
        "criterion 08 desk-scale training: PASS \
         (test WSR {final_test:.4} = {ratio:.2}x baseline {:.4} >= 1.2x, {:.0} s single-threaded <= 600 s)",
        desk.baseline_wsr, desk.seconds
    );
}

#[test]
fn criterion_09_partial_csi_ordering() {
    let started = Instant::now();
    let desk = desk_deterministic();
    let det_full_final = desk.full_run.record.final_test_wsr().unwrap();

    // deterministic regime, partial CSI
    let det_partial_cfg = TrainConfig {
        epochs: 16,
        batch_size: 64,
        learning_rate: 1e-3,
        precoder_refresh_every: 1,
        seed: MASTER_SEED,
        csi_mode: CsiMode::Partial {
            anchor_rows: 2,
            anchor_cols: 2,
        },
        threads: 2,
    };
    let det_partial = train_ao(
        &desk.train,
        &desk.test,
        &partial_csi_default_specs(5),
        &det_partial_cfg,
    )
    .unwrap();
    let det_partial_final = det_partial.record.final_test_wsr().unwrap();
    let det_ratio = det_partial_final / det_full_final;

    // i.i.d. regime, full and partial CSI
    let geometry = GeometryConfig::default();
    let (iid_train, iid_test) = build_dataset(
        &geometry,
        Regime::Iid,
        &ChannelGenConfig::default(),
        256,
        64,
        0x11d,
        10.0,
    )
    .unwrap();
    let iid_baseline = baseline_mean(&iid_test);

    let iid_full_cfg = TrainConfig {
        epochs: 30,
        batch_size: 64,
        learning_rate: 1e-3,
        precoder_refresh_every: 1,
        seed: 0x11d,
        csi_mode: CsiMode::Full,
        threads: 2,
    };
    let iid_full = train_ao(
        &iid_train,
        &iid_test,
        &full_csi_default_specs(5),
        &iid_full_cfg,
    )
    .unwrap();
    let iid_full_final = iid_full.record.final_test_wsr().unwrap();

    let iid_partial_cfg = TrainConfig {
        epochs: 12,
        csi_mode: CsiMode::Partial {
            anchor_rows: 2,
            anchor_cols: 2,
        },
        ..iid_full_cfg.clone()
    };
    let iid_partial = train_ao(
        &iid_train,
        &iid_test,
        &partial_csi_default_specs(5),
        &iid_partial_cfg,
    )
    .unwrap();
    let iid_partial_final = iid_partial.record.final_test_wsr().unwrap();

    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        det_ratio >= 0.85,
        "deterministic partial/full ratio {det_ratio:.3} below 0.85 \
         (partial {det_partial_final:.4}, full {det_full_final:.4})"
    );
    assert!(
        iid_full_final >= 1.2 * iid_baseline,
        "iid full-CSI WSR {iid_full_final:.4} below 1.2x baseline {iid_baseline:.4}"
    );
    assert!(
        iid_partial_final <= 1.1 * iid_baseline,
        "iid partial-CSI WSR {iid_partial_final:.4} above 1.1x baseline {iid_baseline:.4}"
    );
    assert!(elapsed <= 1200.0, "runtime {elapsed:.0} s exceeds 20 min");
    println!(
        "criterion 09 partial-CSI ordering: PASS \
         (det partial/full {det_ratio:.2} >= 0.85; iid full {:.2}x baseline >= 1.2, iid partial {:.2}x baseline <= 1.1; {elapsed:.0} s)",
        iid_full_final / iid_baseline,
        iid_partial_final / iid_baseline
    );
}

#[test]
fn criterion_10_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_riswsr");
    let base = std::env::temp_dir().join(format!("riswsr-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    let config_path = base.join("config.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{
  "geometry": {{"ris_rows": 4, "ris_cols": 4}},
  "regime": "deterministic",
  "dataset": {{"train_size": 6, "test_size": 3}},
  "train": {{"epochs": 3, "batch_size": 3, "seed": 5}},
  "seed": 5,
  "dataset_dir": "{}"
}}"#,
            base.join("data").display()
        ),
    )
    .unwrap();

    let run = |args: &[&str]| {
        let output = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("binary runs");
        assert!(
            output.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };

    // generate twice: archives must be byte-identical
    let config = config_path.to_str().unwrap();
    let data_a = base.join("data");
    run(&[
        "generate",
        "--config",
        config,
        "--out",
        data_a.to_str().unwrap(),
    ]);
    let gen_b = base.join("data-b");
    run(&[
        "generate",
        "--config",
        config,
        "--out",
        gen_b.to_str().unwrap(),
    ]);
    for entry in [
        "train/manifest.json",
        "train/sample_00000.bin",
        "test/sample_00002.bin",
    ] {
        let a = std::fs::read(data_a.join(entry)).unwrap();
        let b = std::fs::read(gen_b.join(entry)).unwrap();
        assert_eq!(a, b, "generate is not reproducible at {entry}");
    }

    // train twice and once more with a different thread count
    let run_a = base.join("run-a");
    let run_b = base.join("run-b");
    let run_t2 = base.join("run-t2");
    run(&[
        "train",
        "--config",
        config,
        "--out",
        run_a.to_str().unwrap(),
    ]);
    run(&[
        "train",
        "--config",
        config,
        "--out",
        run_b.to_str().unwrap(),
    ]);
    run(&[
        "train",
        "--config",
        config,
        "--out",
        run_t2.to_str().unwrap(),
        "--threads",
        "2",
    ]);

    let record = |dir: &std::path::Path| -> Vec<(u64, u64)> {
        let text = std::fs::read_to_string(dir.join("run_record.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["epochs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| {
                (
                    e["train_wsr"].as_f64().unwrap().to_bits(),
                    e["test_wsr"].as_f64().unwrap().to_bits(),
                )
            })
            .collect()
    };
    let a = record(&run_a);
    assert_eq!(a, record(&run_b), "seeded training is not reproducible");
    assert_eq!(a, record(&run_t2), "results depend on --threads");

    // checkpoints byte-identical as well
    let ck_a = std::fs::read(run_a.join("checkpoint/params.bin")).unwrap();
    let ck_t2 = std::fs::read(run_t2.join("checkpoint/params.bin")).unwrap();
    assert_eq!(ck_a, ck_t2, "checkpoints depend on --threads");

    let _ = std::fs::remove_dir_all(&base);
    println!(
        "criterion 10 reproducibility: PASS \
         (archives byte-identical, records bit-identical across reruns and thread counts)"
    );
}
