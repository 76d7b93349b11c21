//! RIS phase vectors and their induced diagonal matrices.

use num_complex::Complex64;

use crate::linalg::ComplexMatrix;

use super::RisnetError;

/// Unwrapped phase shifts of all RIS elements. The induced signal-processing
/// matrix is diagonal with unit-modulus entries `exp(j phi_n)` by
/// construction, so the passive-RIS constraints hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    phases: Vec<f64>,
}

impl PhaseConfiguration {
    pub fn new(phases: Vec<f64>) -> Result<Self, RisnetError> {
        if let Some(idx) = phases.iter().position(|p| !p.is_finite()) {
            return Err(RisnetError::NonFinitePhase { index: idx });
        }
        Ok(Self { phases })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// The diagonal entries `exp(j phi_n)`.
    pub fn unit_entries(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&p| Complex64::new(p.cos(), p.sin()))
            .collect()
    }

    /// The dense diagonal matrix with off-diagonal entries exactly zero.
    pub fn phi(&self) -> ComplexMatrix {
        phases_to_phi(&self.phases).expect("phases validated at construction")
    }
}

/// Build the diagonal matrix `diag(exp(j phi_n))` from a phase vector.
pub fn phases_to_phi(phases: &[f64]) -> Result<ComplexMatrix, RisnetError> {
    if let Some(idx) = phases.iter().position(|p| !p.is_finite()) {
        return Err(RisnetError::NonFinitePhase { index: idx });
    }
    let n = phases.len();
    let mut phi = ComplexMatrix::zeros(n, n);
    for (i, &p) in phases.iter().enumerate() {
        phi[(i, i)] = Complex64::new(p.cos(), p.sin());
    }
    Ok(phi)
}
