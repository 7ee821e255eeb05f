//! SNR combination, 64-QAM GMI, throughput and the per-channel QoT report.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::quad::gauss_hermite;
use crate::spectral::{
    frequency_to_wavelength_nm, ChannelPlan, SpectralTable, TableError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum QotError {
    EmptyComponents,
    NonFinite { what: &'static str, value: f64 },
    BadOverhead { value: f64 },
    LengthMismatch(&'static str),
    Table(TableError),
}

impl fmt::Display for QotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QotError::EmptyComponents => write!(f, "SNR combination needs at least one component"),
            QotError::NonFinite { what, value } => write!(f, "non-finite {what}: {value}"),
            QotError::BadOverhead { value } => {
                write!(f, "overhead must lie in [0, 1), got {value}")
            }
            QotError::LengthMismatch(what) => write!(f, "length mismatch: {what}"),
            QotError::Table(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for QotError {}

impl From<TableError> for QotError {
    fn from(e: TableError) -> Self {
        QotError::Table(e)
    }
}

/// Harmonic SNR combination in the linear domain:
/// SNR_total = (Σ SNR_c⁻¹)⁻¹, inputs and output in dB.
pub fn combine_snr(components_db: &[f64]) -> Result<f64, QotError> {
    if components_db.is_empty() {
        return Err(QotError::EmptyComponents);
    }
    let mut inv_sum = 0.0;
    for &c in components_db {
        if !c.is_finite() {
            return Err(QotError::NonFinite {
                what: "SNR component",
                value: c,
            });
        }
        inv_sum += fmath::powf(10.0, -c / 10.0);
    }
    Ok(-10.0 * fmath::log10(inv_sum))
}

/// Gray-labelled 8-ASK amplitudes in ascending order, unit-spacing halves.
const ASK8: [f64; 8] = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0];

fn gray_bit(index: usize, bit: usize) -> usize {
    ((index ^ (index >> 1)) >> bit) & 1
}

/// Bitwise mutual information of Gray 8-ASK at noise deviation `sigma`
/// (levels scaled by `d`), evaluated by Gauss–Hermite quadrature over the
/// noise. Returns bits per real dimension.
fn ask8_gmi_gh(d: f64, sigma: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let norm = 1.0 / fmath::sqrt(core::f64::consts::PI);
    let mut info = 3.0;
    for bit in 0..3 {
        let mut loss = 0.0;
        for (tx, &x0) in ASK8.iter().enumerate() {
            let b0 = gray_bit(tx, bit);
            for (&t, &w) in nodes.iter().zip(weights) {
                let y = x0 * d + core::f64::consts::SQRT_2 * sigma * t;
                // log2( Σ_all e^{-d²} / Σ_same-bit e^{-d²} ), max-subtracted.
                let mut m = f64::INFINITY;
                let mut d2 = [0.0; 8];
                for (rx, &x) in ASK8.iter().enumerate() {
                    let diff = y - x * d;
                    d2[rx] = diff * diff * inv_two_sigma2;
                    if d2[rx] < m {
                        m = d2[rx];
                    }
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for (rx, &e) in d2.iter().enumerate() {
                    let v = fmath::exp(-(e - m));
                    num += v;
                    if gray_bit(rx, bit) == b0 {
                        den += v;
                    }
                }
                loss += w * fmath::ln(num / den);
            }
        }
        info -= norm * loss / (8.0 * core::f64::consts::LN_2);
    }
    info
}

/// Dual-polarization GMI of Gray-labelled 64-QAM over AWGN at the given SNR
/// per polarization, in bits per symbol (saturates at 12).
///
/// Square Gray-mapped QAM factorizes into two independent 8-ASK problems per
/// polarization, so a one-dimensional 64-node Gauss–Hermite rule evaluates
/// the expectation exactly as the two-dimensional tensor rule would.
pub fn gmi_64qam(snr_db: f64) -> f64 {
    gmi_64qam_with_nodes(snr_db, 64)
}

/// GMI with an explicit Gauss–Hermite node count.
pub fn gmi_64qam_with_nodes(snr_db: f64, gh_nodes: usize) -> f64 {
    let snr = fmath::powf(10.0, snr_db / 10.0);
    // Unit symbol energy: per-quadrature power 0.5 = 21 d², noise σ² = 1/(2 SNR).
    let d = fmath::sqrt(0.5 / 21.0);
    let sigma = fmath::sqrt(0.5 / snr);
    let (nodes, weights) = gauss_hermite(gh_nodes);
    let per_quadrature = ask8_gmi_gh(d, sigma, &nodes, &weights);
    (2.0 * per_quadrature * 2.0).clamp(0.0, 12.0)
}

/// xoshiro256++ with splitmix64 seeding; enough randomness for the
/// Monte-Carlo oracle and fully deterministic for a fixed seed.
struct Rng {
    s: [u64; 4],
}

impl Rng {
    fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut next = || {
            sm = sm.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        };
        Self {
            s: [next(), next(), next(), next()],
        }
    }

    fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller.
    fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        fmath::sqrt(-2.0 * fmath::ln(u1)) * fmath::cos(2.0 * core::f64::consts::PI * u2)
    }
}

/// Monte-Carlo GMI estimator (oracle mode): dual-pol Gray 64-QAM, fixed seed.
pub fn gmi_64qam_monte_carlo(snr_db: f64, samples: usize, seed: u64) -> f64 {
    let snr = fmath::powf(10.0, snr_db / 10.0);
    let d = fmath::sqrt(0.5 / 21.0);
    let sigma = fmath::sqrt(0.5 / snr);
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let mut rng = Rng::new(seed);
    let mut info = 3.0 * samples as f64;
    for _ in 0..samples {
        let tx = (rng.next_u64() % 8) as usize;
        let y = ASK8[tx] * d + sigma * rng.normal();
        let mut d2 = [0.0; 8];
        let mut m = f64::INFINITY;
        for (rx, &x) in ASK8.iter().enumerate() {
            let diff = y - x * d;
            d2[rx] = diff * diff * inv_two_sigma2;
            if d2[rx] < m {
                m = d2[rx];
            }
        }
        let mut num = 0.0;
        let mut den = [0.0; 3];
        for (rx, &e) in d2.iter().enumerate() {
            let v = fmath::exp(-(e - m));
            num += v;
            for (bit, slot) in den.iter_mut().enumerate() {
                if gray_bit(rx, bit) == gray_bit(tx, bit) {
                    *slot += v;
                }
            }
        }
        for &dn in &den {
            info -= fmath::ln(num / dn) / core::f64::consts::LN_2;
        }
    }
    let per_quadrature = info / samples as f64;
    (2.0 * per_quadrature * 2.0).clamp(0.0, 12.0)
}

/// Per-channel net data rate: GMI × symbol rate × (1 − overhead).
pub fn channel_rates(
    gmi_bits: &[f64],
    symbol_rates: &[f64],
    overhead: f64,
) -> Result<Vec<f64>, QotError> {
    if !(0.0..1.0).contains(&overhead) {
        return Err(QotError::BadOverhead { value: overhead });
    }
    if gmi_bits.len() != symbol_rates.len() {
        return Err(QotError::LengthMismatch("gmi vs symbol rates"));
    }
    Ok(gmi_bits
        .iter()
        .zip(symbol_rates)
        .map(|(&g, &r)| g * r * (1.0 - overhead))
        .collect())
}

/// Wavelength band for per-band aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub min_nm: f64,
    pub max_nm: f64,
}

impl Band {
    pub fn contains(&self, wavelength_nm: f64) -> bool {
        wavelength_nm >= self.min_nm && wavelength_nm < self.max_nm
    }
}

/// One channel's QoT summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelQot {
    pub channel: usize,
    pub wavelength_nm: f64,
    pub frequency: f64,
    pub snr_trx_db: Option<f64>,
    pub snr_ase_db: f64,
    pub snr_nli_db: f64,
    pub snr_total_db: f64,
    pub gmi_bits: f64,
    pub rate_bps: f64,
}

/// Full per-channel QoT report with throughput aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct QotReport {
    pub channels: Vec<ChannelQot>,
    pub total_throughput_bps: f64,
    pub band_throughput_bps: Vec<(String, f64)>,
}

/// Assemble the report from per-channel signal/ASE/NLI powers (all W in the
/// channel bandwidth). The transceiver SNR table, when present, is sampled
/// per channel in dB vs wavelength.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    plan: &ChannelPlan,
    signal_w: &[f64],
    ase_w: &[f64],
    nli_w: &[f64],
    trx_snr: Option<&SpectralTable>,
    bands: &[Band],
    overhead: f64,
    gh_nodes: usize,
) -> Result<QotReport, QotError> {
    let n = plan.len();
    if signal_w.len() != n || ase_w.len() != n || nli_w.len() != n {
        return Err(QotError::LengthMismatch("state vs plan"));
    }
    if !(0.0..1.0).contains(&overhead) {
        return Err(QotError::BadOverhead { value: overhead });
    }

    let mut channels = Vec::with_capacity(n);
    for (i, ch) in plan.channels().iter().enumerate() {
        let wavelength_nm = frequency_to_wavelength_nm(ch.center_frequency);
        let snr_ase_db = 10.0 * fmath::log10(signal_w[i] / ase_w[i].max(1e-300));
        let snr_nli_db = 10.0 * fmath::log10(signal_w[i] / nli_w[i].max(1e-300));
        let snr_trx_db = match trx_snr {
            Some(table) => Some(table.eval(wavelength_nm)?),
            None => None,
        };
        let mut components = Vec::with_capacity(3);
        components.push(snr_ase_db);
        components.push(snr_nli_db);
        if let Some(t) = snr_trx_db {
            components.push(t);
        }
        let snr_total_db = combine_snr(&components)?;
        let gmi_bits = gmi_64qam_with_nodes(snr_total_db, gh_nodes);
        let rate_bps = gmi_bits * ch.symbol_rate * (1.0 - overhead);
        channels.push(ChannelQot {
            channel: i,
            wavelength_nm,
            frequency: ch.center_frequency,
            snr_trx_db,
            snr_ase_db,
            snr_nli_db,
            snr_total_db,
            gmi_bits,
            rate_bps,
        });
    }

    let total_throughput_bps = channels.iter().map(|c| c.rate_bps).sum();
    let band_throughput_bps = bands
        .iter()
        .map(|b| {
            let sum = channels
                .iter()
                .filter(|c| b.contains(c.wavelength_nm))
                .map(|c| c.rate_bps)
                .sum();
            (b.label.clone(), sum)
        })
        .collect();

    Ok(QotReport {
        channels,
        total_throughput_bps,
        band_throughput_bps,
    })
}
