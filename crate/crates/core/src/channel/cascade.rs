//! Cascaded BS-to-user channel assembly.
//!
//! The closed form solves `X (I - Phi S_II) = G` by a right LU solve and
//! returns `D + X Phi H`; an explicit inverse is never formed. The oracle
//! assembles the full block scattering matrix of transmitter, RIS and
//! receiver ports and inverts the coupled system numerically, serving as the
//! independent reference for both the closed form and its second-order
//! correction.

use num_complex::Complex64;

use crate::linalg::{cmatmul, lu_factor, ComplexMatrix};
use crate::risnet::PhaseConfiguration;

use super::{ChannelError, ChannelSample};

/// Which assembly of the cascaded channel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeMode {
    /// `D + G (I - Phi S_II)^{-1} Phi H` via LU right solve.
    ClosedForm,
    /// Closed form corrected by the second-order transmitter reflection
    /// term, `C_cf (I + T_TT)^{-1}`.
    WithSecondOrder,
    /// Coupling ignored: `D + G Phi H`.
    NoCoupling,
}

/// Multiply row `n` of `m` by `scales[n]`.
fn scale_rows(scales: &[Complex64], m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| scales[i] * m[(i, j)])
}

/// Assemble the cascaded channel `C` (users x BS antennas) for the given
/// phase configuration.
pub fn cascaded_channel(
    sample: &ChannelSample,
    phi: &PhaseConfiguration,
    mode: CascadeMode,
) -> Result<ComplexMatrix, ChannelError> {
    let n = sample.ris_elements();
    if phi.len() != n {
        return Err(ChannelError::InvalidConfig(format!(
            "phase vector has {} entries for {} RIS elements",
            phi.len(),
            n
        )));
    }
    let unit = phi.unit_entries();
    let phi_h = scale_rows(&unit, &sample.h);

    match mode {
        CascadeMode::NoCoupling => {
            let g_phi_h = cmatmul(&sample.g, &phi_h)?;
            Ok(sample.d.add(&g_phi_h)?)
        }
        CascadeMode::ClosedForm => {
            let x = coupling_solve(sample, &unit)?;
            let x_phi_h = cmatmul(&x, &phi_h)?;
            Ok(sample.d.add(&x_phi_h)?)
        }
        CascadeMode::WithSecondOrder => {
            let system = coupling_system(sample, &unit)?;
            let x = system.solve_right(&sample.g)?;
            let x_phi_h = cmatmul(&x, &phi_h)?;
            let c_cf = sample.d.add(&x_phi_h)?;
            // T_TT = Hᵀ (I - Phi S_II)^{-1} Phi H, with S_TI = Hᵀ by
            // reciprocity
            let y = system.solve_left(&phi_h)?;
            let t_tt = cmatmul(&sample.h.transpose(), &y)?;
            let m = sample.bs_antennas();
            let i_plus_t = ComplexMatrix::identity(m).add(&t_tt)?;
            let corrected = lu_factor(&i_plus_t)?.solve_right(&c_cf)?;
            Ok(corrected)
        }
    }
}

/// LU factorization of `I - Phi S_II`.
fn coupling_system(
    sample: &ChannelSample,
    unit: &[Complex64],
) -> Result<crate::linalg::LuFactorization, ChannelError> {
    let n = sample.ris_elements();
    let phi_s = scale_rows(unit, &sample.s_ii);
    let a = ComplexMatrix::identity(n).sub(&phi_s)?;
    Ok(lu_factor(&a)?)
}

/// Solve `X (I - Phi S_II) = G`.
fn coupling_solve(
    sample: &ChannelSample,
    unit: &[Complex64],
) -> Result<ComplexMatrix, ChannelError> {
    Ok(coupling_system(sample, unit)?.solve_right(&sample.g)?)
}

/// Brute-force reference channel from the full block scattering matrix.
///
/// The port ordering is transmitter (M), RIS (N), receiver (U). Reciprocity
/// closes the unspecified blocks as transposes: `S_TI = Hᵀ`, `S_TR = Dᵀ`,
/// `S_IR = Gᵀ`. The coupled response `T = S (I - Lambda S)^{-1}` is computed
/// by one dense solve of size `M + N + U`, and the channel is
/// `T_RT (I + T_TT)^{-1}` for matched transmitter and receiver.
pub fn oracle_channel_general(
    sample: &ChannelSample,
    phi: &PhaseConfiguration,
) -> Result<ComplexMatrix, ChannelError> {
    let n = sample.ris_elements();
    let m = sample.bs_antennas();
    let u = sample.users();
    if phi.len() != n {
        return Err(ChannelError::InvalidConfig(format!(
            "phase vector has {} entries for {} RIS elements",
            phi.len(),
            n
        )));
    }
    let total = m + n + u;

    let mut s = ComplexMatrix::zeros(total, total);
    let put = |s: &mut ComplexMatrix, row0: usize, col0: usize, block: &ComplexMatrix| {
        for i in 0..block.rows() {
            for j in 0..block.cols() {
                s[(row0 + i, col0 + j)] = block[(i, j)];
            }
        }
    };
    let h_t = sample.h.transpose();
    let d_t = sample.d.transpose();
    let g_t = sample.g.transpose();
    put(&mut s, 0, m, &h_t); // S_TI
    put(&mut s, 0, m + n, &d_t); // S_TR
    put(&mut s, m, 0, &sample.h); // S_IT
    put(&mut s, m, m, &sample.s_ii); // S_II
    put(&mut s, m, m + n, &g_t); // S_IR
    put(&mut s, m + n, 0, &sample.d); // S_RT
    put(&mut s, m + n, m, &sample.g); // S_RI

    // Lambda has the RIS reflection block only
    let unit = phi.unit_entries();
    let mut lambda_s = ComplexMatrix::zeros(total, total);
    for i in 0..n {
        for j in 0..total {
            lambda_s[(m + i, j)] = unit[i] * s[(m + i, j)];
        }
    }
    let system = ComplexMatrix::identity(total).sub(&lambda_s)?;
    let t = lu_factor(&system)?.solve_right(&s)?;

    let t_rt = ComplexMatrix::from_fn(u, m, |i, j| t[(m + n + i, j)]);
    let t_tt = ComplexMatrix::from_fn(m, m, |i, j| t[(i, j)]);
    let i_plus_t = ComplexMatrix::identity(m).add(&t_tt)?;
    Ok(lu_factor(&i_plus_t)?.solve_right(&t_rt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, ChannelGenConfig, GeometryConfig, Regime};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mini_geometry() -> GeometryConfig {
        GeometryConfig {
            ris_rows: 2,
            ris_cols: 2,
            ..Default::default()
        }
    }

    fn sample_with(seed: u64, coupling: f64) -> ChannelSample {
        let cfg = ChannelGenConfig {
            coupling,
            ..Default::default()
        };
        generate_channels(&mini_geometry(), Regime::Deterministic, 1, seed, &cfg)
            .unwrap()
            .remove(0)
    }

    fn random_phases(n: usize, seed: u64) -> PhaseConfiguration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseConfiguration::new(
            (0..n)
                .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                .collect(),
        )
        .unwrap()
    }

    fn rel_err(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn zero_coupling_reduces_closed_form_exactly() {
        let mut sample = sample_with(5, 0.4);
        sample.s_ii = ComplexMatrix::zeros(4, 4);
        let phi = random_phases(4, 11);
        let reduced = cascaded_channel(&sample, &phi, CascadeMode::NoCoupling).unwrap();
        let closed = cascaded_channel(&sample, &phi, CascadeMode::ClosedForm).unwrap();
        assert!(rel_err(&closed, &reduced) <= 1e-12);
    }

    #[test]
    fn zero_coupling_reduces_all_modes_at_physical_gains() {
        // the transmitter round trip scales with the squared link gain, so
        // at free-space magnitudes the second-order mode collapses onto the
        // reduced channel as well
        let mut sample = sample_with(5, 0.4);
        sample.s_ii = ComplexMatrix::zeros(4, 4);
        let scale = |m: &ComplexMatrix| {
            let factor = 1e-6 / crate::linalg::spectral_norm(m, 100);
            m.scale(num_complex::Complex64::new(factor, 0.0))
        };
        sample.h = scale(&sample.h);
        sample.g = scale(&sample.g);
        sample.d = scale(&sample.d);
        let phi = random_phases(4, 11);
        let reduced = cascaded_channel(&sample, &phi, CascadeMode::NoCoupling).unwrap();
        for mode in [CascadeMode::ClosedForm, CascadeMode::WithSecondOrder] {
            let c = cascaded_channel(&sample, &phi, mode).unwrap();
            assert!(
                rel_err(&c, &reduced) <= 1e-12,
                "mode {mode:?} deviates by {}",
                rel_err(&c, &reduced)
            );
        }
    }

    #[test]
    fn identity_phases_without_coupling_or_direct_path() {
        let mut sample = sample_with(6, 0.0);
        sample.d = ComplexMatrix::zeros(2, 4);
        let phi = PhaseConfiguration::new(vec![0.0; 4]).unwrap();
        let c = cascaded_channel(&sample, &phi, CascadeMode::ClosedForm).unwrap();
        let gh = cmatmul(&sample.g, &sample.h).unwrap();
        assert!(rel_err(&c, &gh) <= 1e-13);
    }

    #[test]
    fn second_order_mode_matches_block_oracle() {
        for seed in 0..5u64 {
            let sample = sample_with(40 + seed, 0.5);
            let phi = random_phases(4, 90 + seed);
            let fast = cascaded_channel(&sample, &phi, CascadeMode::WithSecondOrder).unwrap();
            let oracle = oracle_channel_general(&sample, &phi).unwrap();
            let err = rel_err(&fast, &oracle);
            assert!(err <= 1e-8, "seed {seed}: closed form vs oracle {err}");
        }
    }

    #[test]
    fn closed_form_error_is_second_order_in_gain() {
        // scale all links so the round trip through the transmitter is weak
        for seed in 0..3u64 {
            let mut sample = sample_with(70 + seed, 0.5);
            let scale = |m: &ComplexMatrix| {
                let factor = 1e-3 / crate::linalg::spectral_norm(m, 100);
                m.scale(num_complex::Complex64::new(factor, 0.0))
            };
            sample.h = scale(&sample.h);
            sample.g = scale(&sample.g);
            sample.d = scale(&sample.d);
            let phi = random_phases(4, 120 + seed);
            let fast = cascaded_channel(&sample, &phi, CascadeMode::ClosedForm).unwrap();
            let oracle = oracle_channel_general(&sample, &phi).unwrap();
            let err = rel_err(&fast, &oracle);
            assert!(err <= 1e-5, "seed {seed}: dropped-term error {err}");
        }
    }

    #[test]
    fn oracle_without_coupling_approaches_reduced_form() {
        // with S_II = 0 and link gains scaled to 1e-3 the full block oracle
        // collapses onto D + G Phi H up to the dropped round-trip term
        let mut sample = sample_with(52, 0.5);
        sample.s_ii = ComplexMatrix::zeros(4, 4);
        let scale = |m: &ComplexMatrix| {
            let factor = 1e-3 / crate::linalg::spectral_norm(m, 100);
            m.scale(num_complex::Complex64::new(factor, 0.0))
        };
        sample.h = scale(&sample.h);
        sample.g = scale(&sample.g);
        sample.d = scale(&sample.d);
        let phi = random_phases(4, 61);
        let oracle = oracle_channel_general(&sample, &phi).unwrap();
        let reduced = cascaded_channel(&sample, &phi, CascadeMode::NoCoupling).unwrap();
        let err = rel_err(&oracle, &reduced);
        assert!(err <= 1e-5, "oracle vs reduced at small gains: {err}");
    }

    #[test]
    fn decoupled_blocks_reduce_to_direct_channel() {
        let mut sample = sample_with(33, 0.6);
        sample.h = ComplexMatrix::zeros(4, 4);
        sample.g = ComplexMatrix::zeros(2, 4);
        let phi = random_phases(4, 3);
        let c = oracle_channel_general(&sample, &phi).unwrap();
        assert!(rel_err(&c, &sample.d) <= 1e-12);
    }

    #[test]
    fn channel_is_affine_in_direct_path() {
        let sample = sample_with(8, 0.5);
        let phi = random_phases(4, 21);
        let mut d1 = sample.clone();
        d1.d = crate::linalg::ComplexMatrix::from_fn(2, 4, |i, j| {
            num_complex::Complex64::new(0.1 * (i as f64 + 1.0), 0.05 * j as f64)
        });
        let mut d2 = sample.clone();
        d2.d = d1.d.scale(num_complex::Complex64::new(-0.7, 0.2));
        let mut d12 = sample.clone();
        d12.d = d1.d.add(&d2.d).unwrap();
        let mut d0 = sample.clone();
        d0.d = ComplexMatrix::zeros(2, 4);

        let c1 = cascaded_channel(&d1, &phi, CascadeMode::ClosedForm).unwrap();
        let c2 = cascaded_channel(&d2, &phi, CascadeMode::ClosedForm).unwrap();
        let c12 = cascaded_channel(&d12, &phi, CascadeMode::ClosedForm).unwrap();
        let c0 = cascaded_channel(&d0, &phi, CascadeMode::ClosedForm).unwrap();

        let lhs = c12;
        let rhs = c1.add(&c2).unwrap().sub(&c0).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                let diff = (lhs[(i, j)] - rhs[(i, j)]).norm();
                assert!(diff <= 1e-12, "affinity violated at ({i},{j}): {diff}");
            }
        }
    }
}
