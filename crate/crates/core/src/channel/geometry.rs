//! Array geometry shared by all channel regimes.

use serde::{Deserialize, Serialize};

use super::ChannelError;

/// Antenna counts and spacings. The RIS is a `ris_rows x ris_cols` grid with
/// quarter-wavelength spacing by default; the base station is a uniform
/// linear array at half-wavelength spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub bs_antennas: usize,
    pub ris_rows: usize,
    pub ris_cols: usize,
    pub users: usize,
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// BS element spacing in wavelengths.
    pub bs_spacing: f64,
    /// RIS element spacing in wavelengths.
    pub ris_spacing: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            bs_antennas: 4,
            ris_rows: 18,
            ris_cols: 18,
            users: 2,
            carrier_frequency: 3.5e9,
            bs_spacing: 0.5,
            ris_spacing: 0.25,
        }
    }
}

impl GeometryConfig {
    pub fn ris_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.bs_antennas == 0 {
            return Err(ChannelError::InvalidConfig(
                "bs_antennas must be at least 1".into(),
            ));
        }
        if self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(ChannelError::InvalidConfig(
                "RIS grid must have at least one element".into(),
            ));
        }
        // the other-user feature classes divide by U - 1
        if self.users < 2 {
            return Err(ChannelError::InvalidConfig(
                "at least two users are required".into(),
            ));
        }
        if self.carrier_frequency <= 0.0 || self.bs_spacing <= 0.0 || self.ris_spacing <= 0.0 {
            return Err(ChannelError::InvalidConfig(
                "frequency and spacings must be positive".into(),
            ));
        }
        Ok(())
    }
}
