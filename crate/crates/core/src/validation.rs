//! Self-contained property sweep behind the `validate` command.
//!
//! Each check exercises one invariant from the library modules at desk
//! scale and reports pass/fail with a measured figure, so a fresh install
//! can be vetted in seconds without the full acceptance run.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gradcheck, Tape, Tensor};
use crate::channel::{
    cascaded_channel, compute_features, derive_seed, generate_channels, oracle_channel_general,
    CascadeMode, ChannelGenConfig, FeatureStats, FeatureTensor, GeometryConfig, Regime,
};
use crate::linalg::{cmatmul, lu_factor, pinv_left, spectral_norm, ComplexMatrix, SolveSide};
use crate::precoding::{random_phase_baseline, wmmse_precoder, wsr_objective, WmmseConfig};
use crate::risnet::{
    forward, full_csi_default_specs, init_params, layer_forward, partial_csi_default_specs,
    LayerMode, LayerSpec,
};
use crate::training::{
    build_dataset, direct_objective_value, evaluate_sample, sample_wsr_tape, tape_objective_value,
    CsiMode, TrainConfig,
};

/// Outcome of one property check.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyReport {
    fn check(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

fn rel_err(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn mini_geometry(rows: usize, cols: usize, users: usize) -> GeometryConfig {
    GeometryConfig {
        ris_rows: rows,
        ris_cols: cols,
        users,
        ..Default::default()
    }
}

fn random_phases(n: usize, seed: u64) -> crate::risnet::PhaseConfiguration {
    random_phase_baseline(n, seed)
}

/// Run every property check with sub-seeds derived from `seed`.
pub fn run_all(seed: u64) -> Vec<PropertyReport> {
    let mut reports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xa11));

    // linalg: associativity, LU reconstruction/solve residual, pseudo-inverse
    {
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let a = random_matrix(4, 3, &mut rng);
            let b = random_matrix(3, 5, &mut rng);
            let c = random_matrix(5, 2, &mut rng);
            let left = cmatmul(&cmatmul(&a, &b).unwrap(), &c).unwrap();
            let right = cmatmul(&a, &cmatmul(&b, &c).unwrap()).unwrap();
            worst = worst.max(rel_err(&left, &right));
        }
        reports.push(PropertyReport::check(
            "linalg.matmul_associativity",
            worst <= 1e-12,
            format!("max relative deviation {worst:.3e} (bound 1e-12)"),
        ));

        let mut a = random_matrix(6, 6, &mut rng);
        for i in 0..6 {
            a[(i, i)] += Complex64::new(4.0, 0.0);
        }
        let b = random_matrix(6, 3, &mut rng);
        let f = lu_factor(&a).unwrap();
        let x = f.solve(&b, SolveSide::Left).unwrap();
        let residual = rel_err(&cmatmul(&a, &x).unwrap(), &b);
        reports.push(PropertyReport::check(
            "linalg.lu_solve_residual",
            residual <= 1e-10,
            format!("relative residual {residual:.3e} (bound 1e-10)"),
        ));

        let h = random_matrix(8, 3, &mut rng);
        let p = pinv_left(&h).unwrap();
        let gap = rel_err(&cmatmul(&p, &h).unwrap(), &ComplexMatrix::identity(3));
        reports.push(PropertyReport::check(
            "linalg.pinv_left_identity",
            gap <= 1e-9,
            format!("pseudo-inverse gap {gap:.3e} (bound 1e-9)"),
        ));
    }

    // autodiff: primitive gradchecks, batch-sum linearity, determinism
    {
        let mut worst = 0.0f64;
        for trial in 0..10u64 {
            let point = vec![Tensor::from_vec(
                &[4],
                (0..4)
                    .map(|i| 0.4 + 0.13 * (trial as f64) + 0.21 * i as f64)
                    .collect(),
            )];
            let err = gradcheck(
                |tape, params| {
                    let s = tape.sin(params[0])?;
                    let sq = tape.square(s)?;
                    let l = tape.log(params[0])?;
                    let mix = tape.add(sq, l)?;
                    let total = tape.sum_axis(mix, 0)?;
                    tape.square(total)
                },
                &point,
                1e-5,
            )
            .unwrap();
            worst = worst.max(err);
        }
        reports.push(PropertyReport::check(
            "autodiff.gradcheck_composite",
            worst < 1e-5,
            format!("max relative error {worst:.3e} (bound 1e-5)"),
        ));

        let theta = Tensor::from_vec(&[3], vec![0.4, -0.8, 1.5]);
        let one = |tape: &mut Tape, p: crate::autodiff::NodeId, shift: f64| {
            let c = tape.input(Tensor::filled(&[3], shift));
            let s = tape.add(p, c).unwrap();
            let sq = tape.square(s).unwrap();
            tape.sum_axis(sq, 0).unwrap()
        };
        let mut joint = Tape::new();
        let p = joint.param(theta.clone());
        let a = one(&mut joint, p, 0.3);
        let b = one(&mut joint, p, -1.1);
        let total = joint.add(a, b).unwrap();
        let joint_grad = joint.backward(total).unwrap();
        let mut summed = vec![0.0; 3];
        for shift in [0.3, -1.1] {
            let mut tape = Tape::new();
            let p = tape.param(theta.clone());
            let s = one(&mut tape, p, shift);
            let g = tape.backward(s).unwrap();
            for (acc, v) in summed.iter_mut().zip(g[0].data()) {
                *acc += v;
            }
        }
        let worst = joint_grad[0]
            .data()
            .iter()
            .zip(&summed)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-12))
            .fold(0.0, f64::max);
        reports.push(PropertyReport::check(
            "autodiff.batch_sum_linearity",
            worst <= 1e-10,
            format!("max relative deviation {worst:.3e} (bound 1e-10)"),
        ));
    }

    // channel: oracle equivalence, reduction, linearity in D, norm guard,
    // feature equivariance
    {
        let geometry = mini_geometry(2, 2, 2);
        let gen = ChannelGenConfig {
            coupling: 0.5,
            ..Default::default()
        };
        let samples = generate_channels(
            &geometry,
            Regime::Deterministic,
            5,
            derive_seed(seed, 0xc4a),
            &gen,
        )
        .unwrap();
        let mut worst_so = 0.0f64;
        let mut worst_cf = 0.0f64;
        for (i, sample) in samples.iter().enumerate() {
            let phi = random_phases(4, derive_seed(seed, 0xf0 + i as u64));
            let oracle = oracle_channel_general(sample, &phi).unwrap();
            let with_so = cascaded_channel(sample, &phi, CascadeMode::WithSecondOrder).unwrap();
            worst_so = worst_so.max(rel_err(&with_so, &oracle));

            let mut scaled = sample.clone();
            let shrink = |m: &ComplexMatrix| {
                let f = 1e-3 / spectral_norm(m, 100);
                m.scale(Complex64::new(f, 0.0))
            };
            scaled.h = shrink(&sample.h);
            scaled.g = shrink(&sample.g);
            scaled.d = shrink(&sample.d);
            let oracle_small = oracle_channel_general(&scaled, &phi).unwrap();
            let cf = cascaded_channel(&scaled, &phi, CascadeMode::ClosedForm).unwrap();
            worst_cf = worst_cf.max(rel_err(&cf, &oracle_small));
        }
        reports.push(PropertyReport::check(
            "channel.oracle_equivalence",
            worst_so <= 1e-8,
            format!("second-order vs block oracle {worst_so:.3e} (bound 1e-8)"),
        ));
        reports.push(PropertyReport::check(
            "channel.closed_form_drop_error",
            worst_cf <= 1e-5,
            format!("dropped-term error at small gains {worst_cf:.3e} (bound 1e-5)"),
        ));

        let mut no_coupling = samples[0].clone();
        no_coupling.s_ii = ComplexMatrix::zeros(4, 4);
        let phi = random_phases(4, derive_seed(seed, 0xfe));
        let reduced = cascaded_channel(&no_coupling, &phi, CascadeMode::NoCoupling).unwrap();
        let closed = cascaded_channel(&no_coupling, &phi, CascadeMode::ClosedForm).unwrap();
        let gap = rel_err(&closed, &reduced);
        reports.push(PropertyReport::check(
            "channel.no_coupling_reduction",
            gap <= 1e-12,
            format!("closed form vs reduced {gap:.3e} (bound 1e-12)"),
        ));

        let norm = spectral_norm(&samples[0].s_ii, 200);
        reports.push(PropertyReport::check(
            "channel.coupling_norm_guard",
            norm < 0.9,
            format!("spectral norm {norm:.4} (bound 0.9)"),
        ));

        // affine in the direct path: C(D1 + D2) = C(D1) + C(D2) - C(0)
        let phi = random_phases(4, derive_seed(seed, 0xd1f));
        let mut d1 = samples[1].clone();
        d1.d = random_matrix(2, 4, &mut rng);
        let mut d2 = samples[1].clone();
        d2.d = random_matrix(2, 4, &mut rng);
        let mut d12 = samples[1].clone();
        d12.d = d1.d.add(&d2.d).unwrap();
        let mut d0 = samples[1].clone();
        d0.d = ComplexMatrix::zeros(2, 4);
        let c = |s: &crate::channel::ChannelSample| {
            cascaded_channel(s, &phi, CascadeMode::ClosedForm).unwrap()
        };
        let lhs = c(&d12);
        let rhs = c(&d1).add(&c(&d2)).unwrap().sub(&c(&d0)).unwrap();
        let worst = lhs
            .entries()
            .iter()
            .zip(rhs.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        reports.push(PropertyReport::check(
            "channel.linear_in_direct_path",
            worst <= 1e-12,
            format!("max entry deviation {worst:.3e} (bound 1e-12)"),
        ));

        let stats = FeatureStats::identity();
        let base = compute_features(&samples[0], None, &stats).unwrap();
        let mut swapped = samples[0].clone();
        for j in 0..swapped.g.cols() {
            let tmp = swapped.g[(0, j)];
            swapped.g[(0, j)] = swapped.g[(1, j)];
            swapped.g[(1, j)] = tmp;
        }
        for j in 0..swapped.d.cols() {
            let tmp = swapped.d[(0, j)];
            swapped.d[(0, j)] = swapped.d[(1, j)];
            swapped.d[(1, j)] = tmp;
        }
        swapped.weights.swap(0, 1);
        let perm = compute_features(&swapped, None, &stats).unwrap();
        let expected = base.permute_users(&[1, 0]);
        let equal = perm == expected;
        reports.push(PropertyReport::check(
            "channel.feature_user_equivariance",
            equal,
            "user swap permutes the feature tensor bit-exactly".into(),
        ));
    }

    // risnet: loop/tensor equality, equivariance, invariance, constraints
    {
        let specs = vec![LayerSpec::normal(5, 16), LayerSpec::final_layer(64)];
        let params = init_params(&specs, derive_seed(seed, 0x11)).unwrap();
        let mut worst = 0.0f64;
        for trial in 0..4u64 {
            let data: Vec<f64> = (0..5 * 9 * 2)
                .map(|i| ((i as f64) * 0.37 + trial as f64).sin())
                .collect();
            let input = FeatureTensor::from_vec(5, 9, 2, data);
            let looped = layer_forward(&input, &params, 0, LayerMode::Loop).unwrap();
            let tensored = layer_forward(&input, &params, 0, LayerMode::Tensor).unwrap();
            worst = worst.max(
                looped
                    .data()
                    .iter()
                    .zip(tensored.data())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        reports.push(PropertyReport::check(
            "risnet.loop_tensor_equality",
            worst <= 1e-10,
            format!("max entry deviation {worst:.3e} (bound 1e-10)"),
        ));

        // per-layer permutation equivariance
        let mut worst = 0.0f64;
        for trial in 0..4u64 {
            let data: Vec<f64> = (0..5 * 9 * 3)
                .map(|i| ((i as f64) * 0.29 + trial as f64).cos())
                .collect();
            let input = FeatureTensor::from_vec(5, 9, 3, data);
            let perm = [2usize, 0, 1];
            let base = layer_forward(&input, &params, 0, LayerMode::Tensor).unwrap();
            let permuted =
                layer_forward(&input.permute_users(&perm), &params, 0, LayerMode::Tensor).unwrap();
            let expected = base.permute_users(&perm);
            worst = worst.max(
                permuted
                    .data()
                    .iter()
                    .zip(expected.data())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        reports.push(PropertyReport::check(
            "risnet.layer_equivariance",
            worst <= 1e-12,
            format!("max entry deviation under user permutation {worst:.3e} (bound 1e-12)"),
        ));

        let full = init_params(&full_csi_default_specs(5), derive_seed(seed, 0x12)).unwrap();
        let data: Vec<f64> = (0..5 * 36 * 3).map(|i| ((i as f64) * 0.13).cos()).collect();
        let input = FeatureTensor::from_vec(5, 36, 3, data);
        let base = forward(&input, &full, (6, 6)).unwrap();
        let permuted = forward(&input.permute_users(&[2, 0, 1]), &full, (6, 6)).unwrap();
        let drift = base
            .phases()
            .iter()
            .zip(permuted.phases())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        reports.push(PropertyReport::check(
            "risnet.permutation_invariance",
            drift <= 1e-9,
            format!("max phase drift under user permutation {drift:.3e} (bound 1e-9)"),
        ));

        let partial = init_params(&partial_csi_default_specs(5), derive_seed(seed, 0x13)).unwrap();
        let data: Vec<f64> = (0..5 * 4 * 2).map(|i| ((i as f64) * 0.77).sin()).collect();
        let anchor_input = FeatureTensor::from_vec(5, 4, 2, data);
        let phases = forward(&anchor_input, &partial, (2, 2)).unwrap();
        let phi = phases.phi();
        let mut modulus_gap = 0.0f64;
        let mut off_diag_ok = true;
        for i in 0..phi.rows() {
            for j in 0..phi.cols() {
                if i == j {
                    modulus_gap = modulus_gap.max((phi[(i, j)].norm() - 1.0).abs());
                } else if phi[(i, j)] != Complex64::new(0.0, 0.0) {
                    off_diag_ok = false;
                }
            }
        }
        reports.push(PropertyReport::check(
            "risnet.phase_constraints",
            modulus_gap <= 1e-15 && off_diag_ok,
            format!(
                "unit-modulus gap {modulus_gap:.3e} (bound 1e-15), off-diagonal zero: {off_diag_ok}"
            ),
        ));
        reports.push(PropertyReport::check(
            "risnet.parameter_count_independent",
            full.scalar_count()
                == init_params(&full_csi_default_specs(5), 99)
                    .unwrap()
                    .scalar_count(),
            "trainable count is a function of the specs alone".into(),
        ));
    }

    // precoding: power feasibility, monotone WSR, WSR invariances
    {
        let mut worst_drop = 0.0f64;
        let mut power_ok = true;
        for i in 0..20u64 {
            let users = 2 + (i % 3) as usize;
            let c = random_matrix(users, 4, &mut rng);
            let raw: Vec<f64> = (0..users).map(|_| rng.random::<f64>() + 0.1).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let outcome = wmmse_precoder(&c, &weights, 0.2, 1.0, &WmmseConfig::default()).unwrap();
            for pair in outcome.wsr_trace.windows(2) {
                worst_drop = worst_drop.max(pair[0] - pair[1]);
            }
            if outcome.precoder.transmit_power() > 1.0 + 1e-9 {
                power_ok = false;
            }
        }
        reports.push(PropertyReport::check(
            "precoding.wmmse_monotone",
            worst_drop <= 1e-9,
            format!("worst per-step WSR drop {worst_drop:.3e} (slack 1e-9)"),
        ));
        reports.push(PropertyReport::check(
            "precoding.power_feasibility",
            power_ok,
            "trace(V V^H) <= E_Tr + 1e-9 on all runs".into(),
        ));

        let c = random_matrix(2, 4, &mut rng);
        let v = crate::precoding::PrecodingMatrix {
            v: random_matrix(4, 2, &mut rng),
        };
        let base = wsr_objective(&c, &v, 0.3, &[0.4, 0.6]).unwrap();
        let rot = Complex64::new(0.6, 0.8);
        let rotated = crate::precoding::PrecodingMatrix {
            v: ComplexMatrix::from_fn(4, 2, |i, j| {
                if j == 0 {
                    v.v[(i, j)] * rot
                } else {
                    v.v[(i, j)]
                }
            }),
        };
        let after = wsr_objective(&c, &rotated, 0.3, &[0.4, 0.6]).unwrap();
        reports.push(PropertyReport::check(
            "precoding.wsr_phase_invariance",
            (base - after).abs() <= 1e-12,
            format!(
                "column rotation changes WSR by {:.3e}",
                (base - after).abs()
            ),
        ));

        // joint user permutation leaves the objective unchanged
        let c3 = random_matrix(3, 4, &mut rng);
        let v3 = random_matrix(4, 3, &mut rng);
        let weights = [0.2, 0.5, 0.3];
        let base = wsr_objective(
            &c3,
            &crate::precoding::PrecodingMatrix { v: v3.clone() },
            0.3,
            &weights,
        )
        .unwrap();
        let perm = [2usize, 0, 1];
        let c_perm = ComplexMatrix::from_fn(3, 4, |i, j| c3[(perm[i], j)]);
        let v_perm = ComplexMatrix::from_fn(4, 3, |i, j| v3[(i, perm[j])]);
        let w_perm: Vec<f64> = perm.iter().map(|&p| weights[p]).collect();
        let permuted = wsr_objective(
            &c_perm,
            &crate::precoding::PrecodingMatrix { v: v_perm },
            0.3,
            &w_perm,
        )
        .unwrap();
        reports.push(PropertyReport::check(
            "precoding.wsr_user_permutation_invariance",
            (base - permuted).abs() <= 1e-12,
            format!(
                "user permutation changes WSR by {:.3e}",
                (base - permuted).abs()
            ),
        ));
    }

    // training: objective consistency and the end-to-end gradient
    {
        let geometry = mini_geometry(3, 3, 2);
        let (train, _) = build_dataset(
            &geometry,
            Regime::Iid,
            &ChannelGenConfig::default(),
            1,
            1,
            derive_seed(seed, 0x7e57),
            10.0,
        )
        .unwrap();
        let sample = &train.samples[0];
        let features = compute_features(sample, None, &train.stats).unwrap();
        let specs = vec![LayerSpec::normal(5, 16), LayerSpec::final_layer(64)];
        let params = init_params(&specs, derive_seed(seed, 0x20)).unwrap();
        let eval =
            evaluate_sample(sample, &features, &params, (3, 3), &WmmseConfig::default()).unwrap();

        let on_tape =
            tape_objective_value(sample, &features, &eval.precoder, &params, (3, 3)).unwrap();
        let direct =
            direct_objective_value(sample, &features, &eval.precoder, &params, (3, 3)).unwrap();
        let gap = (on_tape - direct).abs() / direct.abs().max(1e-12);
        reports.push(PropertyReport::check(
            "training.objective_consistency",
            gap <= 1e-10,
            format!("tape vs direct objective {gap:.3e} (bound 1e-10)"),
        ));

        let mut tape = Tape::new();
        let node = sample_wsr_tape(
            &mut tape,
            sample,
            &features,
            &eval.precoder,
            &params,
            (3, 3),
        )
        .unwrap();
        let analytic = tape.backward(node).unwrap();
        let step = 1e-5;
        let mut worst = 0.0f64;
        // spot-check a spread of coordinates instead of all of them
        for (ti, tensor) in params.tensors().iter().enumerate() {
            let stride = (tensor.numel() / 7).max(1);
            for ci in (0..tensor.numel()).step_by(stride) {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].data_mut()[ci] += step;
                let mut minus = params.clone();
                minus.tensors_mut()[ti].data_mut()[ci] -= step;
                let fp =
                    tape_objective_value(sample, &features, &eval.precoder, &plus, (3, 3)).unwrap();
                let fm = tape_objective_value(sample, &features, &eval.precoder, &minus, (3, 3))
                    .unwrap();
                let numeric = (fp - fm) / (2.0 * step);
                let a = analytic[ti].data()[ci];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12));
            }
        }
        reports.push(PropertyReport::check(
            "training.end_to_end_gradient",
            worst < 1e-4,
            format!("max relative gradient error {worst:.3e} (bound 1e-4)"),
        ));

        // determinism of a short seeded run
        let (train2, test2) = build_dataset(
            &geometry,
            Regime::Deterministic,
            &ChannelGenConfig::default(),
            2,
            1,
            derive_seed(seed, 0xd0),
            10.0,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            seed: derive_seed(seed, 0xd1),
            csi_mode: CsiMode::Full,
            ..Default::default()
        };
        let a = crate::training::train_ao(&train2, &test2, &specs, &cfg).unwrap();
        let b = crate::training::train_ao(&train2, &test2, &specs, &cfg).unwrap();
        let identical = a.params == b.params
            && a.record.epochs.iter().zip(&b.record.epochs).all(|(x, y)| {
                x.train_wsr.to_bits() == y.train_wsr.to_bits()
                    && x.test_wsr.to_bits() == y.test_wsr.to_bits()
            });
        reports.push(PropertyReport::check(
            "training.seeded_determinism",
            identical,
            "two runs with one seed reproduce parameters and records bit-exactly".into(),
        ));

        // stability with the precoders never refreshed: the 10-epoch moving
        // average of the train WSR must not give back more than 5%
        let (train3, test3) = build_dataset(
            &geometry,
            Regime::Deterministic,
            &ChannelGenConfig::default(),
            6,
            1,
            derive_seed(seed, 0xf20),
            10.0,
        )
        .unwrap();
        let frozen_cfg = TrainConfig {
            epochs: 20,
            batch_size: 6,
            precoder_refresh_every: 0,
            seed: derive_seed(seed, 0xf21),
            csi_mode: CsiMode::Full,
            ..Default::default()
        };
        let outcome = crate::training::train_ao(&train3, &test3, &specs, &frozen_cfg).unwrap();
        let values: Vec<f64> = outcome.record.epochs.iter().map(|e| e.train_wsr).collect();
        let mut peak = f64::NEG_INFINITY;
        let mut stable = true;
        let mut worst_ratio = 1.0f64;
        for window in values.windows(10) {
            let avg = window.iter().sum::<f64>() / 10.0;
            if peak.is_finite() && avg < peak * 0.95 {
                stable = false;
            }
            if peak.is_finite() {
                worst_ratio = worst_ratio.min(avg / peak);
            }
            peak = peak.max(avg);
        }
        reports.push(PropertyReport::check(
            "training.frozen_precoder_stability",
            stable,
            format!("lowest moving-average ratio to peak {worst_ratio:.4} (floor 0.95)"),
        ));
    }

    reports
}
