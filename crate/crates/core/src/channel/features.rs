//! Network input features.
//!
//! The feature of user `u` and RIS element `n` concatenates the user weight
//! with amplitude and phase of `g_un` and of `j_un`, where `J = D H⁺` maps
//! the direct channel onto the RIS elements. Amplitudes are log-scaled with
//! a relative floor and z-scored with statistics frozen from the training
//! split.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{cmatmul, pinv_left, ComplexMatrix};

use super::{ChannelError, ChannelSample};

/// Amplitude floor relative to the per-sample RMS amplitude, in dB.
pub const LOG_FLOOR_DB: f64 = -30.0;

/// Number of input features per (user, element) pair.
pub const INPUT_FEATURES: usize = 5;

/// Real tensor of shape (features x elements x users) in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    features: usize,
    elements: usize,
    users: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(features: usize, elements: usize, users: usize) -> Self {
        Self {
            features,
            elements,
            users,
            data: vec![0.0; features * elements * users],
        }
    }

    pub fn from_vec(features: usize, elements: usize, users: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), features * elements * users);
        Self {
            features,
            elements,
            users,
            data,
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, feature: usize, element: usize, user: usize) -> f64 {
        self.data[(feature * self.elements + element) * self.users + user]
    }

    pub fn set(&mut self, feature: usize, element: usize, user: usize, value: f64) {
        self.data[(feature * self.elements + element) * self.users + user] = value;
    }

    /// Reorder the user axis: output user `u` takes input user `perm[u]`.
    pub fn permute_users(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.users);
        let mut out = Self::zeros(self.features, self.elements, self.users);
        for f in 0..self.features {
            for n in 0..self.elements {
                for (u, &src) in perm.iter().enumerate() {
                    out.set(f, n, u, self.get(f, n, src));
                }
            }
        }
        out
    }
}

/// Z-score statistics for the two amplitude features, frozen from the
/// training split so train and test see the same normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub g_amp_mean: f64,
    pub g_amp_std: f64,
    pub j_amp_mean: f64,
    pub j_amp_std: f64,
}

impl FeatureStats {
    /// No-op normalization, useful for standalone feature inspection.
    pub fn identity() -> Self {
        Self {
            g_amp_mean: 0.0,
            g_amp_std: 1.0,
            j_amp_mean: 0.0,
            j_amp_std: 1.0,
        }
    }

    /// Mean and standard deviation of the floored log-amplitudes over a set
    /// of samples.
    pub fn from_samples(samples: &[ChannelSample]) -> Result<Self, ChannelError> {
        let mut g_values = Vec::new();
        let mut j_values = Vec::new();
        for sample in samples {
            let j = j_matrix(sample)?;
            let g_floor = amplitude_floor(&sample.g);
            let j_floor = amplitude_floor(&j);
            for z in sample.g.entries() {
                g_values.push(log_amplitude(z, g_floor));
            }
            for z in j.entries() {
                j_values.push(log_amplitude(z, j_floor));
            }
        }
        let stats = |values: &[f64]| {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
            (mean, var.sqrt().max(1e-12))
        };
        let (g_amp_mean, g_amp_std) = stats(&g_values);
        let (j_amp_mean, j_amp_std) = stats(&j_values);
        Ok(Self {
            g_amp_mean,
            g_amp_std,
            j_amp_mean,
            j_amp_std,
        })
    }
}

fn j_matrix(sample: &ChannelSample) -> Result<ComplexMatrix, ChannelError> {
    let h_pinv = pinv_left(&sample.h)?;
    Ok(cmatmul(&sample.d, &h_pinv)?)
}

/// RMS amplitude scaled down by the relative floor.
fn amplitude_floor(m: &ComplexMatrix) -> f64 {
    let rms = (m.gram_trace() / (m.rows() * m.cols()) as f64).sqrt();
    let reference = if rms > 0.0 { rms } else { 1e-30 };
    reference * 10f64.powf(LOG_FLOOR_DB / 20.0)
}

fn log_amplitude(z: &Complex64, floor: f64) -> f64 {
    20.0 * z.norm().max(floor).log10()
}

/// Phase in (-pi, pi], zero for a zero entry.
fn phase(z: &Complex64) -> f64 {
    z.im.atan2(z.re)
}

/// Build the 5-feature input tensor, optionally restricted to the given
/// anchor-element columns.
pub fn compute_features(
    sample: &ChannelSample,
    anchor_set: Option<&[usize]>,
    stats: &FeatureStats,
) -> Result<FeatureTensor, ChannelError> {
    let n = sample.ris_elements();
    let users = sample.users();
    if let Some(anchors) = anchor_set {
        if anchors.iter().any(|&a| a >= n) {
            return Err(ChannelError::InvalidConfig(format!(
                "anchor index out of range for {n} elements"
            )));
        }
    }
    let j = j_matrix(sample)?;
    let g_floor = amplitude_floor(&sample.g);
    let j_floor = amplitude_floor(&j);

    let columns: Vec<usize> = match anchor_set {
        Some(anchors) => anchors.to_vec(),
        None => (0..n).collect(),
    };
    let mut out = FeatureTensor::zeros(INPUT_FEATURES, columns.len(), users);
    for (slot, &col) in columns.iter().enumerate() {
        for user in 0..users {
            let g_entry = sample.g[(user, col)];
            let j_entry = j[(user, col)];
            out.set(0, slot, user, sample.weights[user]);
            out.set(
                1,
                slot,
                user,
                (log_amplitude(&g_entry, g_floor) - stats.g_amp_mean) / stats.g_amp_std,
            );
            out.set(2, slot, user, phase(&g_entry));
            out.set(
                3,
                slot,
                user,
                (log_amplitude(&j_entry, j_floor) - stats.j_amp_mean) / stats.j_amp_std,
            );
            out.set(4, slot, user, phase(&j_entry));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, ChannelGenConfig, GeometryConfig, Regime};
    use num_complex::Complex64;

    fn mini_sample(seed: u64) -> ChannelSample {
        let geometry = GeometryConfig {
            ris_rows: 3,
            ris_cols: 3,
            ..Default::default()
        };
        generate_channels(
            &geometry,
            Regime::Deterministic,
            1,
            seed,
            &ChannelGenConfig::default(),
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn user_swap_permutes_feature_tensor_bit_exactly() {
        let sample = mini_sample(4);
        let mut swapped = sample.clone();
        // swap the two users in G, D and w
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

        let stats = FeatureStats::identity();
        let base = compute_features(&sample, None, &stats).unwrap();
        let perm = compute_features(&swapped, None, &stats).unwrap();
        let expected = base.permute_users(&[1, 0]);
        assert_eq!(perm, expected);
    }

    #[test]
    fn matched_direct_path_reproduces_g_features() {
        // choose D = G Phi0 H with Phi0 = I and H with orthonormal columns,
        // so J = G exactly and the j-features coincide with the g-features
        let mut sample = mini_sample(9);
        let n = sample.ris_elements();
        let m = sample.bs_antennas();
        // orthonormal columns: scaled identity block
        let mut h = ComplexMatrix::zeros(n, m);
        for k in 0..m {
            h[(k, k)] = Complex64::new(1.0, 0.0);
        }
        sample.h = h;
        sample.d = cmatmul(&sample.g, &sample.h).unwrap();

        let stats = FeatureStats::identity();
        let f = compute_features(&sample, None, &stats).unwrap();
        for u in 0..sample.users() {
            for n_idx in 0..n {
                // phases always match; amplitudes match wherever both are
                // above their floors (the shared columns of G and J)
                let g_amp = f.get(1, n_idx, u);
                let j_amp = f.get(3, n_idx, u);
                let g_ph = f.get(2, n_idx, u);
                let j_ph = f.get(4, n_idx, u);
                if n_idx < m {
                    assert!(
                        (g_amp - j_amp).abs() <= 1e-9,
                        "amplitude mismatch at ({n_idx},{u})"
                    );
                    assert!((g_ph - j_ph).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_entry_hits_floor_with_zero_phase() {
        let mut sample = mini_sample(2);
        sample.g[(0, 0)] = Complex64::new(0.0, 0.0);
        let stats = FeatureStats::identity();
        let f = compute_features(&sample, None, &stats).unwrap();
        let floor = amplitude_floor(&sample.g);
        let expected = 20.0 * floor.log10();
        assert!((f.get(1, 0, 0) - expected).abs() <= 1e-12);
        assert_eq!(f.get(2, 0, 0), 0.0);
    }

    #[test]
    fn anchor_restriction_selects_columns() {
        let sample = mini_sample(6);
        let stats = FeatureStats::identity();
        let full = compute_features(&sample, None, &stats).unwrap();
        let anchors = [2usize, 7];
        let partial = compute_features(&sample, Some(&anchors), &stats).unwrap();
        assert_eq!(partial.elements(), 2);
        for f in 0..INPUT_FEATURES {
            for (slot, &col) in anchors.iter().enumerate() {
                for u in 0..sample.users() {
                    assert_eq!(partial.get(f, slot, u), full.get(f, col, u));
                }
            }
        }
    }
}
