//! Parametric RIS mutual-coupling matrix.

use num_complex::Complex64;

use crate::linalg::{spectral_norm, ComplexMatrix};

use super::geometry::GeometryConfig;
use super::ChannelError;

/// Coupling matrix together with the rescale factor applied by the norm
/// guard, when one was needed.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub matrix: ComplexMatrix,
    pub rescale_factor: Option<f64>,
}

/// Spectral-norm bound enforced on every coupling matrix; the closed-form
/// channel assembly relies on it.
pub const COUPLING_NORM_BOUND: f64 = 0.9;

/// Build the mutual-coupling matrix of the RIS grid.
///
/// Off-diagonal entry `(p, q)` is `kappa * exp(j 2 pi d) / (2 pi d)` with
/// `d` the inter-element distance in wavelengths; the diagonal is zero. If
/// the spectral norm reaches 0.9 the matrix is rescaled just under the bound
/// and the factor recorded. The parametric model is deterministic, so the
/// seed argument is reserved.
pub fn generate_s_ii(
    geometry: &GeometryConfig,
    kappa: f64,
    _seed: u64,
) -> Result<CouplingMatrix, ChannelError> {
    if kappa < 0.0 {
        return Err(ChannelError::InvalidConfig(format!(
            "coupling strength must be nonnegative, got {kappa}"
        )));
    }
    let rows = geometry.ris_rows;
    let cols = geometry.ris_cols;
    let n = rows * cols;
    let spacing = geometry.ris_spacing;

    let mut matrix = ComplexMatrix::zeros(n, n);
    for p in 0..n {
        let (pr, pc) = (p / cols, p % cols);
        for q in 0..n {
            if p == q {
                continue;
            }
            let (qr, qc) = (q / cols, q % cols);
            let dr = pr as f64 - qr as f64;
            let dc = pc as f64 - qc as f64;
            let dist = spacing * (dr * dr + dc * dc).sqrt();
            let arg = std::f64::consts::TAU * dist;
            let magnitude = kappa / arg;
            matrix[(p, q)] = Complex64::new(magnitude * arg.cos(), magnitude * arg.sin());
        }
    }

    // The top of the coupling spectrum can be nearly degenerate, so the
    // power-iteration estimate converges from below; rescale with a small
    // margin and re-check until the estimate clears the bound.
    let mut rescale_factor = None;
    for _ in 0..4 {
        let norm = spectral_norm(&matrix, 500);
        if norm < COUPLING_NORM_BOUND {
            break;
        }
        let factor = COUPLING_NORM_BOUND * (1.0 - 1e-3) / norm;
        matrix = matrix.scale(Complex64::new(factor, 0.0));
        rescale_factor = Some(rescale_factor.unwrap_or(1.0) * factor);
    }

    Ok(CouplingMatrix {
        matrix,
        rescale_factor,
    })
}
