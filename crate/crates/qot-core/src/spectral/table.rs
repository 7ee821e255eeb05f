//! Piecewise-linear spectral lookup tables.

use alloc::vec::Vec;
use core::fmt;

/// Unit of a table's abscissa axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisUnit {
    /// Vacuum wavelength in nm.
    Nm,
    /// Absolute frequency in Hz.
    Hz,
    /// Frequency separation in THz (Raman gain tables).
    Thz,
}

impl fmt::Display for AxisUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisUnit::Nm => write!(f, "nm"),
            AxisUnit::Hz => write!(f, "Hz"),
            AxisUnit::Thz => write!(f, "THz"),
        }
    }
}

/// Behaviour outside the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Hold the edge value.
    Clamp,
    /// Out-of-range queries are errors.
    Error,
}

/// One table node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableError {
    TooFewSamples(usize),
    NotIncreasing { index: usize, x: f64 },
    NonFinite { index: usize },
    OutOfRange { x: f64, min: f64, max: f64 },
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::TooFewSamples(n) => {
                write!(f, "spectral table needs at least 2 samples, got {n}")
            }
            TableError::NotIncreasing { index, x } => {
                write!(f, "abscissa not strictly increasing at sample {index} (x={x})")
            }
            TableError::NonFinite { index } => write!(f, "non-finite sample at index {index}"),
            TableError::OutOfRange { x, min, max } => {
                write!(f, "abscissa {x} outside table range [{min}, {max}]")
            }
        }
    }
}

impl core::error::Error for TableError {}

/// Strictly-increasing sampled curve with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    axis: AxisUnit,
    samples: Vec<Sample>,
    extrapolation: Extrapolation,
}

impl SpectralTable {
    pub fn new(
        axis: AxisUnit,
        samples: Vec<Sample>,
        extrapolation: Extrapolation,
    ) -> Result<Self, TableError> {
        if samples.len() < 2 {
            return Err(TableError::TooFewSamples(samples.len()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.x.is_finite() || !s.value.is_finite() {
                return Err(TableError::NonFinite { index: i });
            }
            if i > 0 && s.x <= samples[i - 1].x {
                return Err(TableError::NotIncreasing { index: i, x: s.x });
            }
        }
        Ok(Self {
            axis,
            samples,
            extrapolation,
        })
    }

    /// Convenience constructor from (x, value) pairs.
    pub fn from_pairs(
        axis: AxisUnit,
        pairs: &[(f64, f64)],
        extrapolation: Extrapolation,
    ) -> Result<Self, TableError> {
        let samples = pairs.iter().map(|&(x, value)| Sample { x, value }).collect();
        Self::new(axis, samples, extrapolation)
    }

    /// A table that evaluates to the same value everywhere.
    pub fn flat(axis: AxisUnit, x_min: f64, x_max: f64, value: f64) -> Result<Self, TableError> {
        Self::from_pairs(axis, &[(x_min, value), (x_max, value)], Extrapolation::Clamp)
    }

    pub fn axis(&self) -> AxisUnit {
        self.axis
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn x_min(&self) -> f64 {
        self.samples[0].x
    }

    pub fn x_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].x
    }

    pub fn covers(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    /// Piecewise-linear interpolation at `x` (in the table's axis unit).
    /// Exact at nodes; out-of-range behaviour per the extrapolation mode.
    pub fn eval(&self, x: f64) -> Result<f64, TableError> {
        if !x.is_finite() {
            return Err(TableError::OutOfRange {
                x,
                min: self.x_min(),
                max: self.x_max(),
            });
        }
        if x < self.x_min() || x > self.x_max() {
            return match self.extrapolation {
                Extrapolation::Clamp => Ok(if x < self.x_min() {
                    self.samples[0].value
                } else {
                    self.samples[self.samples.len() - 1].value
                }),
                Extrapolation::Error => Err(TableError::OutOfRange {
                    x,
                    min: self.x_min(),
                    max: self.x_max(),
                }),
            };
        }
        // partition_point returns the first index with sample.x > x.
        let hi = self.samples.partition_point(|s| s.x <= x);
        if hi == self.samples.len() {
            return Ok(self.samples[hi - 1].value);
        }
        let lo = hi - 1;
        let a = self.samples[lo];
        let b = self.samples[hi];
        if x == a.x {
            return Ok(a.value);
        }
        let t = (x - a.x) / (b.x - a.x);
        Ok(a.value + t * (b.value - a.value))
    }
}
