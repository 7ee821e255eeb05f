//! CSV and summary emitters. All numbers go through the 6-significant-digit
//! formatter so identical inputs produce byte-identical files.

use std::fmt::Write as _;

use qot_core::link::{LinkState, SpectrumRecord};
use qot_core::qot::{ChannelQot, QotReport};
use qot_core::raman::{PowerProfileSet, WaveKind};
use qot_core::spectral::{frequency_to_wavelength_nm, ChannelPlan};

use crate::numfmt::sig6;

/// Power profiles: one row per z node, one column per wave.
pub fn profiles_csv(profiles: &PowerProfileSet) -> String {
    let mut out = String::new();
    out.push_str("z_km");
    for w in profiles.waves() {
        match w.kind {
            WaveKind::Signal => {
                let _ = write!(out, ",sig_{}thz", sig6(w.frequency * 1e-12));
            }
            WaveKind::Pump => {
                let _ = write!(
                    out,
                    ",pump_{}nm",
                    sig6(frequency_to_wavelength_nm(w.frequency))
                );
            }
        }
    }
    out.push('\n');
    for (k, &z) in profiles.z_grid().iter().enumerate() {
        let _ = write!(out, "{}", sig6(z));
        for w in profiles.waves() {
            let _ = write!(out, ",{}", sig6(w.power_vs_z[k]));
        }
        out.push('\n');
    }
    out
}

/// Per-channel on/off gain.
pub fn gain_csv(plan: &ChannelPlan, gain_db: &[f64]) -> String {
    let mut out = String::from("wavelength_nm,frequency_thz,on_off_gain_db\n");
    for (ch, &g) in plan.channels().iter().zip(gain_db) {
        let _ = writeln!(
            out,
            "{},{},{}",
            sig6(frequency_to_wavelength_nm(ch.center_frequency)),
            sig6(ch.center_frequency * 1e-12),
            sig6(g)
        );
    }
    out
}

/// Spectrum snapshot rows.
pub fn spectrum_csv(records: &[SpectrumRecord]) -> String {
    let mut out = String::from("wavelength_nm,signal_dbm,ase_dbm,nli_dbm\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            sig6(r.wavelength_nm),
            sig6(r.signal_dbm),
            sig6(r.ase_dbm),
            sig6(r.nli_dbm)
        );
    }
    out
}

/// Fibre in/out spectrum (launch vs span output).
pub fn fibre_spectrum_csv(plan: &ChannelPlan, launch: &[SpectrumRecord], out_rec: &[SpectrumRecord]) -> String {
    let _ = plan;
    let mut out = String::from("wavelength_nm,fibre_in_dbm,fibre_out_dbm\n");
    for (a, b) in launch.iter().zip(out_rec) {
        let _ = writeln!(
            out,
            "{},{},{}",
            sig6(a.wavelength_nm),
            sig6(a.signal_dbm),
            sig6(b.signal_dbm)
        );
    }
    out
}

/// Per-recirculation trace.
pub fn trace_csv(plan: &ChannelPlan, trace: &[LinkState]) -> String {
    let mut out = String::from("recirculation,wavelength_nm,signal_dbm,ase_dbm,nli_dbm\n");
    for (r, state) in trace.iter().enumerate() {
        for rec in qot_core::link::snapshot_spectrum(state, plan) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r + 1,
                sig6(rec.wavelength_nm),
                sig6(rec.signal_dbm),
                sig6(rec.ase_dbm),
                sig6(rec.nli_dbm)
            );
        }
    }
    out
}

/// Per-channel multi-exponential fits, one row per term, for audit.
pub fn fits_csv(plan: &ChannelPlan, fits: &[qot_core::profile::ExponentialFit]) -> String {
    let mut out = String::from("channel,wavelength_nm,term,amplitude,rate_per_km,residual_db\n");
    for (i, fit) in fits.iter().enumerate() {
        let nm = frequency_to_wavelength_nm(plan.channels()[i].center_frequency);
        for (k, term) in fit.terms().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                sig6(nm),
                k + 1,
                sig6(term.amplitude),
                sig6(term.rate_per_km),
                sig6(fit.residual_db())
            );
        }
    }
    out
}

/// Per-channel NLI decomposition.
pub fn nli_csv(result: &qot_core::gn::NliResult) -> String {
    let method = match result.method {
        qot_core::gn::NliMethod::Integral => "integral",
        qot_core::gn::NliMethod::ClosedForm => "closed_form",
    };
    let mut out = String::from("channel,frequency_thz,spm_w,xpm_w,nli_w,method\n");
    for c in &result.channels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.channel,
            sig6(c.frequency * 1e-12),
            sig6(c.spm_w),
            sig6(c.xpm_w),
            sig6(c.nli_w),
            method
        );
    }
    out
}

const REPORT_HEADER: &str =
    "channel,wavelength_nm,frequency_thz,snr_trx_db,snr_ase_db,snr_nli_db,snr_total_db,gmi_bits,rate_gbps";

/// QoT report: one row per channel.
pub fn report_csv(report: &QotReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for c in &report.channels {
        let trx = match c.snr_trx_db {
            Some(v) => sig6(v),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.channel,
            sig6(c.wavelength_nm),
            sig6(c.frequency * 1e-12),
            trx,
            sig6(c.snr_ase_db),
            sig6(c.snr_nli_db),
            sig6(c.snr_total_db),
            sig6(c.gmi_bits),
            sig6(c.rate_bps * 1e-9)
        );
    }
    out
}

/// Parse a report CSV back (for the round-trip contract and downstream
/// tooling). Aggregates are recomputed from the rows.
pub fn ingest_report(text: &str) -> Result<QotReport, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty report")?;
    if header != REPORT_HEADER {
        return Err(format!("unexpected header '{header}'"));
    }
    let mut channels = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("row {}: expected 9 fields", idx + 2));
        }
        let parse = |s: &str| -> Result<f64, String> {
            s.parse().map_err(|_| format!("row {}: bad number '{s}'", idx + 2))
        };
        channels.push(ChannelQot {
            channel: fields[0]
                .parse()
                .map_err(|_| format!("row {}: bad channel index", idx + 2))?,
            wavelength_nm: parse(fields[1])?,
            frequency: parse(fields[2])? * 1e12,
            snr_trx_db: if fields[3].is_empty() {
                None
            } else {
                Some(parse(fields[3])?)
            },
            snr_ase_db: parse(fields[4])?,
            snr_nli_db: parse(fields[5])?,
            snr_total_db: parse(fields[6])?,
            gmi_bits: parse(fields[7])?,
            rate_bps: parse(fields[8])? * 1e9,
        });
    }
    let total = channels.iter().map(|c| c.rate_bps).sum();
    Ok(QotReport {
        channels,
        total_throughput_bps: total,
        band_throughput_bps: Vec::new(),
    })
}

/// Structured run summary (deterministic: no timestamps or absolute paths).
pub fn summary_text(report: &QotReport, recirculations: usize, span_km: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "channels: {}", report.channels.len());
    let _ = writeln!(out, "recirculations: {recirculations}");
    let _ = writeln!(out, "distance_km: {}", sig6(span_km * recirculations as f64));
    let _ = writeln!(
        out,
        "total_throughput_tbps: {}",
        sig6(report.total_throughput_bps * 1e-12)
    );
    for (label, bps) in &report.band_throughput_bps {
        let _ = writeln!(out, "band_throughput_tbps {label}: {}", sig6(bps * 1e-12));
    }
    if let Some(worst) = report
        .channels
        .iter()
        .min_by(|a, b| a.snr_total_db.total_cmp(&b.snr_total_db))
    {
        let _ = writeln!(
            out,
            "min_total_snr_db: {} at channel {} ({} nm)",
            sig6(worst.snr_total_db),
            worst.channel,
            sig6(worst.wavelength_nm)
        );
    }
    out
}
