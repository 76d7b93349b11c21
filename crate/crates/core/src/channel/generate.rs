//! Channel-sample generation for the three regimes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::ComplexMatrix;

use super::coupling::generate_s_ii;
use super::geometry::GeometryConfig;
use super::{ChannelError, ChannelSample};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Channel regime selecting how the per-sample matrices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// A few planar-wavefront paths per link; spatially smooth gains.
    Deterministic,
    /// Sparse paths plus i.i.d. scattering on the RIS-user link.
    DeterministicPlusScatter,
    /// Every entry independent circular complex Gaussian.
    Iid,
}

/// Knobs of the geometric generator, with the defaults used throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGenConfig {
    /// Planar paths in the BS-RIS link.
    pub paths_h: usize,
    /// Planar paths per user in the RIS-user link.
    pub paths_g: usize,
    /// Amplitude attenuation of the direct link, in dB (negative).
    pub blockage_db: f64,
    /// Scattering power relative to the per-entry mean power of G, in dB.
    pub scatter_db: f64,
    /// Mutual-coupling strength kappa.
    pub coupling: f64,
    /// Transmit power budget.
    pub power_budget: f64,
    /// Placeholder noise power; dataset assembly calibrates the final value.
    pub noise_power: f64,
}

impl Default for ChannelGenConfig {
    fn default() -> Self {
        Self {
            paths_h: 4,
            paths_g: 3,
            blockage_db: -20.0,
            scatter_db: -10.0,
            coupling: 0.3,
            power_budget: 1.0,
            noise_power: 1.0,
        }
    }
}

/// Free-space gain `(lambda / (4 pi d))^2`.
pub fn friis_gain(frequency: f64, distance: f64) -> Result<f64, ChannelError> {
    if distance <= 0.0 {
        return Err(ChannelError::InvalidConfig(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if frequency <= 0.0 {
        return Err(ChannelError::InvalidConfig(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    let lambda = SPEED_OF_LIGHT / frequency;
    let ratio = lambda / (4.0 * std::f64::consts::PI * distance);
    Ok(ratio * ratio)
}

/// SplitMix64 step, used to derive independent per-sample seeds from a
/// master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard circular complex Gaussian CN(0, 1).
fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let radius = (-(1.0 - u1).ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    Complex64::new(radius * angle.cos(), radius * angle.sin())
}

/// BS steering vector for a direction cosine `s` in [-1, 1].
fn bs_steering(m: usize, spacing_wl: f64, s: f64) -> Vec<Complex64> {
    (0..m)
        .map(|idx| {
            let phase = std::f64::consts::TAU * spacing_wl * idx as f64 * s;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// RIS steering vector over the row-major grid for direction cosines
/// `(u, v)`.
fn ris_steering(rows: usize, cols: usize, spacing_wl: f64, u: f64, v: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let phase = std::f64::consts::TAU * spacing_wl * (r as f64 * u + c as f64 * v);
            out.push(Complex64::new(phase.cos(), phase.sin()));
        }
    }
    out
}

fn direction_cosine(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

/// Draw `U` nonnegative weights summing to one, uniformly on the simplex.
fn simplex_weights(users: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let exps: Vec<f64> = (0..users)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn sparse_h(geometry: &GeometryConfig, paths: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let n = geometry.ris_elements();
    let m = geometry.bs_antennas;
    let mut h = ComplexMatrix::zeros(n, m);
    let gain_scale = 1.0 / (paths as f64).sqrt();
    for _ in 0..paths {
        let ris = ris_steering(
            geometry.ris_rows,
            geometry.ris_cols,
            geometry.ris_spacing,
            direction_cosine(rng),
            direction_cosine(rng),
        );
        let bs = bs_steering(m, geometry.bs_spacing, direction_cosine(rng));
        let gain = complex_gaussian(rng) * gain_scale;
        for (row, rv) in ris.iter().enumerate() {
            for (col, bv) in bs.iter().enumerate() {
                h[(row, col)] += gain * rv * bv;
            }
        }
    }
    h
}

fn sparse_g(geometry: &GeometryConfig, paths: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let n = geometry.ris_elements();
    let u = geometry.users;
    let mut g = ComplexMatrix::zeros(u, n);
    let gain_scale = 1.0 / (paths as f64).sqrt();
    for user in 0..u {
        for _ in 0..paths {
            let ris = ris_steering(
                geometry.ris_rows,
                geometry.ris_cols,
                geometry.ris_spacing,
                direction_cosine(rng),
                direction_cosine(rng),
            );
            let gain = complex_gaussian(rng) * gain_scale;
            for (col, rv) in ris.iter().enumerate() {
                g[(user, col)] += gain * rv;
            }
        }
    }
    g
}

fn sparse_d(
    geometry: &GeometryConfig,
    paths: usize,
    blockage_amp: f64,
    rng: &mut ChaCha8Rng,
) -> ComplexMatrix {
    let u = geometry.users;
    let m = geometry.bs_antennas;
    let mut d = ComplexMatrix::zeros(u, m);
    let gain_scale = blockage_amp / (paths as f64).sqrt();
    for user in 0..u {
        for _ in 0..paths {
            let bs = bs_steering(m, geometry.bs_spacing, direction_cosine(rng));
            let gain = complex_gaussian(rng) * gain_scale;
            for (col, bv) in bs.iter().enumerate() {
                d[(user, col)] += gain * bv;
            }
        }
    }
    d
}

fn iid_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let entries = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    ComplexMatrix::from_vec(rows, cols, entries)
}

/// Generate `count` reproducible samples of the requested regime.
///
/// Per-sample seeds are derived from `master_seed`, so any sample can be
/// regenerated independently and two calls with the same master seed are
/// bit-identical.
pub fn generate_channels(
    geometry: &GeometryConfig,
    regime: Regime,
    count: usize,
    master_seed: u64,
    cfg: &ChannelGenConfig,
) -> Result<Vec<ChannelSample>, ChannelError> {
    geometry.validate()?;
    if count == 0 {
        return Err(ChannelError::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    if cfg.paths_h == 0 || cfg.paths_g == 0 {
        return Err(ChannelError::InvalidConfig(
            "path counts must be at least 1".into(),
        ));
    }

    let coupling = generate_s_ii(geometry, cfg.coupling, master_seed)?;

    (0..count)
        .map(|index| {
            let seed = derive_seed(master_seed, index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (h, g, d) = match regime {
                Regime::Deterministic | Regime::DeterministicPlusScatter => {
                    let h = sparse_h(geometry, cfg.paths_h, &mut rng);
                    let mut g = sparse_g(geometry, cfg.paths_g, &mut rng);
                    let blockage_amp = 10f64.powf(cfg.blockage_db / 20.0);
                    let d = sparse_d(geometry, cfg.paths_g, blockage_amp, &mut rng);
                    if regime == Regime::DeterministicPlusScatter {
                        // i.i.d. scattering at scatter_db relative to the
                        // per-entry mean power of the sparse part
                        let mean_power = g.gram_trace() / (g.rows() * g.cols()) as f64;
                        let scatter_amp = (mean_power * 10f64.powf(cfg.scatter_db / 10.0)).sqrt();
                        for i in 0..g.rows() {
                            for j in 0..g.cols() {
                                g[(i, j)] += complex_gaussian(&mut rng) * scatter_amp;
                            }
                        }
                    }
                    (h, g, d)
                }
                Regime::Iid => {
                    let n = geometry.ris_elements();
                    let h = iid_matrix(n, geometry.bs_antennas, &mut rng);
                    let g = iid_matrix(geometry.users, n, &mut rng);
                    let d = iid_matrix(geometry.users, geometry.bs_antennas, &mut rng);
                    (h, g, d)
                }
            };
            let weights = simplex_weights(geometry.users, &mut rng);
            Ok(ChannelSample {
                h,
                g,
                d,
                s_ii: coupling.matrix.clone(),
                weights,
                noise_power: cfg.noise_power,
                power_budget: cfg.power_budget,
                regime,
                seed,
            })
        })
        .collect()
}
