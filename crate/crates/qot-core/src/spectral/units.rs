//! Decibel and wavelength/frequency conversions.

use core::fmt;

use crate::constants::SPEED_OF_LIGHT;
use crate::fmath;

/// Error for conversions fed non-finite input.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitError {
    pub what: &'static str,
    pub value: f64,
}

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite {}: {}", self.what, self.value)
    }
}

impl core::error::Error for UnitError {}

/// 10^(x/10). Errors on non-finite input.
pub fn db_to_linear(x_db: f64) -> Result<f64, UnitError> {
    if !x_db.is_finite() {
        return Err(UnitError {
            what: "dB value",
            value: x_db,
        });
    }
    Ok(fmath::powf(10.0, x_db / 10.0))
}

/// 10·log10(x). Errors on non-finite or non-positive input.
pub fn linear_to_db(x: f64) -> Result<f64, UnitError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(UnitError {
            what: "linear ratio",
            value: x,
        });
    }
    Ok(10.0 * fmath::log10(x))
}

/// Power in W for a dBm value.
pub fn dbm_to_watt(x_dbm: f64) -> Result<f64, UnitError> {
    Ok(db_to_linear(x_dbm)? * 1e-3)
}

/// dBm for a power in W.
pub fn watt_to_dbm(p_watt: f64) -> Result<f64, UnitError> {
    linear_to_db(p_watt * 1e3)
}

/// Vacuum wavelength in nm for a frequency in Hz.
pub fn frequency_to_wavelength_nm(f_hz: f64) -> f64 {
    SPEED_OF_LIGHT / f_hz * 1e9
}

/// Frequency in Hz for a vacuum wavelength in nm.
pub fn wavelength_nm_to_frequency(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}
