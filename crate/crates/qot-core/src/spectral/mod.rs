//! Frequency/wavelength grids, unit conversions and interpolated
//! wavelength-dependent lookup tables shared by the solver, the GN model and
//! the link engine.
//!
//! Unit conventions used throughout the crate:
//! frequencies in Hz, wavelengths in nm at API boundaries, powers in W,
//! distances in km, attenuation in dB/km inside tables (converted to the
//! linear power coefficient in 1/km where the ODEs need it), Raman gain in
//! 1/(W·km) keyed on pump–signal frequency separation in THz.

mod fibre;
mod plan;
mod table;
mod units;

pub use fibre::{BetaCoefficients, FibreError, FibreSpec};
pub use plan::{Channel, ChannelPlan, Modulation, PlanError};
pub use table::{AxisUnit, Extrapolation, Sample, SpectralTable, TableError};
pub use units::{
    db_to_linear, dbm_to_watt, frequency_to_wavelength_nm, linear_to_db, watt_to_dbm,
    wavelength_nm_to_frequency, UnitError,
};
