//! WDM channel plans.

use alloc::vec::Vec;
use core::fmt;

/// Modulation of a channel: true 64-QAM carriers or spectrally-shaped
/// Gaussian (ASE-like) dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qam64,
    Gaussian,
}

/// One WDM channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    /// Center frequency, Hz.
    pub center_frequency: f64,
    /// Symbol rate, Baud.
    pub symbol_rate: f64,
    /// Launch power, W.
    pub launch_power: f64,
    pub modulation: Modulation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    Empty,
    NotIncreasing { index: usize },
    Overlap { index: usize, gap_hz: f64 },
    NonPositive { index: usize, what: &'static str },
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Empty => write!(f, "channel plan has no channels"),
            PlanError::NotIncreasing { index } => {
                write!(f, "channel {index} center frequency not strictly increasing")
            }
            PlanError::Overlap { index, gap_hz } => write!(
                f,
                "channels {} and {index} overlap (half-bandwidth gap {gap_hz} Hz)",
                index - 1
            ),
            PlanError::NonPositive { index, what } => {
                write!(f, "channel {index} has non-positive {what}")
            }
        }
    }
}

impl core::error::Error for PlanError {}

/// Ordered, non-overlapping set of WDM channels. Spacing is implied by the
/// centers and need not be uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    channels: Vec<Channel>,
}

impl ChannelPlan {
    pub fn new(channels: Vec<Channel>) -> Result<Self, PlanError> {
        if channels.is_empty() {
            return Err(PlanError::Empty);
        }
        for (i, ch) in channels.iter().enumerate() {
            if !(ch.launch_power > 0.0) || !ch.launch_power.is_finite() {
                return Err(PlanError::NonPositive {
                    index: i,
                    what: "launch power",
                });
            }
            if !(ch.symbol_rate > 0.0) || !ch.symbol_rate.is_finite() {
                return Err(PlanError::NonPositive {
                    index: i,
                    what: "symbol rate",
                });
            }
            if !(ch.center_frequency > 0.0) || !ch.center_frequency.is_finite() {
                return Err(PlanError::NonPositive {
                    index: i,
                    what: "center frequency",
                });
            }
            if i > 0 {
                let prev = &channels[i - 1];
                if ch.center_frequency <= prev.center_frequency {
                    return Err(PlanError::NotIncreasing { index: i });
                }
                let min_gap = 0.5 * (ch.symbol_rate + prev.symbol_rate);
                let gap = ch.center_frequency - prev.center_frequency;
                if gap < min_gap {
                    return Err(PlanError::Overlap {
                        index: i,
                        gap_hz: gap,
                    });
                }
            }
        }
        Ok(Self { channels })
    }

    /// Uniform grid helper: `count` channels starting at `f_start` Hz with
    /// `spacing` Hz, identical symbol rate and power.
    pub fn uniform_grid(
        f_start: f64,
        spacing: f64,
        count: usize,
        symbol_rate: f64,
        launch_power: f64,
        modulation: Modulation,
    ) -> Result<Self, PlanError> {
        let channels = (0..count)
            .map(|i| Channel {
                center_frequency: f_start + i as f64 * spacing,
                symbol_rate,
                launch_power,
                modulation,
            })
            .collect();
        Self::new(channels)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.channels.iter().map(|c| c.center_frequency)
    }

    /// Replace per-channel launch powers, keeping everything else.
    pub fn with_powers(&self, powers: &[f64]) -> Result<Self, PlanError> {
        assert_eq!(powers.len(), self.channels.len());
        let channels = self
            .channels
            .iter()
            .zip(powers)
            .map(|(c, &p)| Channel {
                launch_power: p,
                ..*c
            })
            .collect();
        Self::new(channels)
    }

    /// Index of the channel whose center is nearest the given frequency.
    pub fn nearest_channel(&self, f_hz: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.channels.iter().enumerate() {
            let d = (c.center_frequency - f_hz).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Channel whose band `[f_c - B/2, f_c + B/2]` contains `f_hz`, if any.
    /// Assumes channels are ordered (guaranteed by construction).
    pub fn channel_containing(&self, f_hz: f64) -> Option<usize> {
        // First channel with center >= f - rate/2 is the only candidate or
        // its predecessor is.
        let idx = self
            .channels
            .partition_point(|c| c.center_frequency + 0.5 * c.symbol_rate < f_hz);
        if idx == self.channels.len() {
            return None;
        }
        let c = &self.channels[idx];
        if f_hz >= c.center_frequency - 0.5 * c.symbol_rate
            && f_hz <= c.center_frequency + 0.5 * c.symbol_rate
        {
            Some(idx)
        } else {
            None
        }
    }
}
