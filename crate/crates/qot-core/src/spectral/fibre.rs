//! Fibre parameters: attenuation and Raman-gain curves, dispersion,
//! nonlinearity.

use core::f64::consts::PI;
use core::fmt;

use super::table::{AxisUnit, SpectralTable, TableError};
use super::units::frequency_to_wavelength_nm;
use crate::constants::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq)]
pub enum FibreError {
    NonPositive { what: &'static str, value: f64 },
    WrongAxis { what: &'static str, expected: AxisUnit, got: AxisUnit },
    RamanGainAtZero { value: f64 },
    AttenuationNotPositive { x: f64, value: f64 },
    Table(TableError),
}

impl fmt::Display for FibreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FibreError::NonPositive { what, value } => {
                write!(f, "fibre {what} must be positive, got {value}")
            }
            FibreError::WrongAxis {
                what,
                expected,
                got,
            } => write!(f, "{what} table axis must be {expected}, got {got}"),
            FibreError::RamanGainAtZero { value } => {
                write!(f, "Raman gain at zero separation must be 0, got {value}")
            }
            FibreError::AttenuationNotPositive { x, value } => {
                write!(f, "attenuation must be positive over the table ({value} dB/km at {x} nm)")
            }
            FibreError::Table(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FibreError {}

impl From<TableError> for FibreError {
    fn from(e: TableError) -> Self {
        FibreError::Table(e)
    }
}

/// Dispersion coefficients at the reference wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCoefficients {
    /// Group-velocity dispersion, ps²/km.
    pub beta2_ps2_km: f64,
    /// Dispersion slope coefficient, ps³/km.
    pub beta3_ps3_km: f64,
}

impl BetaCoefficients {
    /// β₂ in s²/km, as used by the GN phase-mismatch kernel.
    pub fn beta2_s2_per_km(&self) -> f64 {
        self.beta2_ps2_km * 1e-24
    }

    /// β₃ in s³/km.
    pub fn beta3_s3_per_km(&self) -> f64 {
        self.beta3_ps3_km * 1e-36
    }
}

/// One fibre type: length, wavelength-dependent attenuation, Raman gain
/// profile (already normalized by the effective area, 1/(W·km) vs THz
/// separation), Kerr nonlinearity and dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreSpec {
    /// Span length, km.
    pub length_km: f64,
    /// Attenuation in dB/km vs wavelength in nm.
    pub attenuation: SpectralTable,
    /// Polarization-averaged Raman gain efficiency in 1/(W·km) vs pump–signal
    /// frequency separation in THz. Clamped to zero beyond the last node.
    pub raman_gain: SpectralTable,
    /// Nonlinear coefficient γ, 1/(W·km).
    pub gamma_per_w_km: f64,
    /// Effective core area, µm² (provenance; raw gain spectra in m/W divide
    /// by this at ingestion).
    pub effective_area_um2: f64,
    /// Dispersion D at the reference wavelength, ps/(nm·km).
    pub dispersion_ps_nm_km: f64,
    /// Dispersion slope S, ps/(nm²·km).
    pub dispersion_slope_ps_nm2_km: f64,
    /// Reference wavelength for D and S, nm.
    pub reference_wavelength_nm: f64,
}

impl FibreSpec {
    pub fn validate(&self) -> Result<(), FibreError> {
        for (what, value) in [
            ("length", self.length_km),
            ("gamma", self.gamma_per_w_km),
            ("effective area", self.effective_area_um2),
            ("reference wavelength", self.reference_wavelength_nm),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(FibreError::NonPositive { what, value });
            }
        }
        if self.attenuation.axis() != AxisUnit::Nm {
            return Err(FibreError::WrongAxis {
                what: "attenuation",
                expected: AxisUnit::Nm,
                got: self.attenuation.axis(),
            });
        }
        if self.raman_gain.axis() != AxisUnit::Thz {
            return Err(FibreError::WrongAxis {
                what: "Raman gain",
                expected: AxisUnit::Thz,
                got: self.raman_gain.axis(),
            });
        }
        for s in self.attenuation.samples() {
            if !(s.value > 0.0) {
                return Err(FibreError::AttenuationNotPositive {
                    x: s.x,
                    value: s.value,
                });
            }
        }
        if self.raman_gain.x_min() <= 0.0 {
            let g0 = self.raman_gain.eval(0.0)?;
            if g0 != 0.0 {
                return Err(FibreError::RamanGainAtZero { value: g0 });
            }
        }
        Ok(())
    }

    /// Attenuation in dB/km at an absolute frequency in Hz.
    pub fn attenuation_db_km(&self, f_hz: f64) -> Result<f64, TableError> {
        self.attenuation.eval(frequency_to_wavelength_nm(f_hz))
    }

    /// Linear power-attenuation coefficient in 1/km at a frequency in Hz
    /// (dP/dz = -α P).
    pub fn attenuation_per_km(&self, f_hz: f64) -> Result<f64, TableError> {
        Ok(self.attenuation_db_km(f_hz)? * core::f64::consts::LN_10 / 10.0)
    }

    /// Raman gain efficiency in 1/(W·km) for a frequency separation in Hz.
    /// Zero at (and below) zero separation and beyond the last table node:
    /// gain vanishes at large detuning, so no spurious extrapolation.
    pub fn raman_gain_at_separation(&self, df_hz: f64) -> f64 {
        if df_hz <= 0.0 {
            return 0.0;
        }
        let df_thz = df_hz * 1e-12;
        if df_thz > self.raman_gain.x_max() {
            return 0.0;
        }
        if df_thz < self.raman_gain.x_min() {
            // Table starting above zero separation: ramp linearly from zero.
            let first = self.raman_gain.samples()[0];
            return first.value * df_thz / first.x;
        }
        self.raman_gain.eval(df_thz).unwrap_or(0.0)
    }

    /// β₂/β₃ at the reference wavelength, converted from D and S.
    pub fn beta_coefficients(&self) -> BetaCoefficients {
        beta_coefficients(
            self.dispersion_ps_nm_km,
            self.dispersion_slope_ps_nm2_km,
            self.reference_wavelength_nm,
        )
    }

    /// Reference frequency (Hz) at which β₂/β₃ are quoted.
    pub fn reference_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / (self.reference_wavelength_nm * 1e-9)
    }
}

/// Convert dispersion D (ps/nm/km) and slope S (ps/nm²/km) at wavelength
/// λ_ref (nm) to β₂ (ps²/km) and β₃ (ps³/km):
/// β₂ = −D λ²/(2πc), β₃ = (λ²/(2πc))² (S + 2D/λ).
pub fn beta_coefficients(d_ps_nm_km: f64, s_ps_nm2_km: f64, lambda_ref_nm: f64) -> BetaCoefficients {
    let lambda_m = lambda_ref_nm * 1e-9;
    // SI per metre first.
    let d_si = d_ps_nm_km * 1e-12 / 1e-9 / 1e3; // s/m²
    let s_si = s_ps_nm2_km * 1e-12 / 1e-18 / 1e3; // s/m³
    let factor = lambda_m * lambda_m / (2.0 * PI * SPEED_OF_LIGHT); // s·m
    let beta2_si = -d_si * factor; // s²/m
    let beta3_si = factor * factor * (s_si + 2.0 * d_si / lambda_m); // s³/m
    BetaCoefficients {
        beta2_ps2_km: beta2_si * 1e24 * 1e3,
        beta3_ps3_km: beta3_si * 1e36 * 1e3,
    }
}
