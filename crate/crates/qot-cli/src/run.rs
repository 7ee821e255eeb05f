//! Drivers behind the CLI subcommands.

use anyhow::Result;

use qot_core::link::{run_scenario, snapshot_spectrum, LinkState, SpectrumRecord};
use qot_core::qot::{build_report, QotReport};
use qot_core::raman::{on_off_gain, solve_power_evolution, PowerProfileSet, PumpSet};

use crate::config::Scenario;

/// Outputs of `solve-span`.
pub struct SpanArtifacts {
    /// Profiles solved with the requested pump setting.
    pub profiles: PowerProfileSet,
    /// Per-channel on/off gain in dB (always computed from both settings).
    pub on_off_gain_db: Vec<f64>,
}

pub fn solve_span(scenario: &Scenario, pumps_on: bool) -> Result<SpanArtifacts> {
    let with = solve_power_evolution(
        &scenario.fibre,
        &scenario.plan,
        &scenario.pumps,
        &scenario.solver,
    )?;
    let without = solve_power_evolution(
        &scenario.fibre,
        &scenario.plan,
        &PumpSet::none(),
        &scenario.solver,
    )?;
    let gain = on_off_gain(&with, &without)?;
    Ok(SpanArtifacts {
        profiles: if pumps_on { with } else { without },
        on_off_gain_db: gain,
    })
}

/// Outputs of `run-link`.
pub struct LinkArtifacts {
    pub trace: Vec<LinkState>,
    pub report: QotReport,
}

pub fn run_link(scenario: &Scenario, recirculations: Option<usize>) -> Result<LinkArtifacts> {
    let mut link = scenario.link_scenario();
    if let Some(n) = recirculations {
        link.recirculations = n;
    }
    let trace = run_scenario(&link)?;
    let last = trace.last().expect("at least one recirculation");
    let report = build_report(
        &scenario.plan,
        &last.signal_w,
        &last.ase_w,
        &last.nli_w,
        scenario.trx_snr.as_ref(),
        &scenario.bands,
        scenario.pilot_overhead,
        scenario.gh_nodes,
    )?;
    Ok(LinkArtifacts { trace, report })
}

/// Outputs of `report`: launch and fibre-out spectra, the per-channel fits
/// and single-span NLI decomposition, plus the full QoT report.
pub struct ReportArtifacts {
    pub launch: Vec<SpectrumRecord>,
    pub fibre_out: Vec<SpectrumRecord>,
    pub fits: Vec<qot_core::profile::ExponentialFit>,
    pub span_nli: qot_core::gn::NliResult,
    pub link: LinkArtifacts,
}

pub fn full_report(scenario: &Scenario, recirculations: Option<usize>) -> Result<ReportArtifacts> {
    let span = solve_span(scenario, true)?;
    let launch_state = LinkState::launch(&scenario.plan);
    let launch = snapshot_spectrum(&launch_state, &scenario.plan);
    let out_state = LinkState {
        signal_w: (0..scenario.plan.len())
            .map(|i| span.profiles.signal_output(i))
            .collect(),
        ase_w: vec![0.0; scenario.plan.len()],
        nli_w: vec![0.0; scenario.plan.len()],
    };
    let fibre_out = snapshot_spectrum(&out_state, &scenario.plan);

    let fit_terms = match &scenario.nli {
        qot_core::link::NliTracking::ClosedForm { fit_terms, .. } => *fit_terms,
        _ => 4,
    };
    let fits: Result<Vec<_>, _> = (0..scenario.plan.len())
        .map(|i| {
            qot_core::profile::normalize_profile(&span.profiles, i).and_then(|rho| {
                qot_core::profile::fit_exponentials(span.profiles.z_grid(), &rho, fit_terms)
            })
        })
        .collect();
    let fits = fits?;
    let span_nli = qot_core::gn::nli_closed_form(
        &scenario.fibre,
        &scenario.plan,
        &fits,
        scenario.fibre.length_km,
        &match &scenario.nli {
            qot_core::link::NliTracking::ClosedForm { config, .. } => *config,
            _ => Default::default(),
        },
    )?;

    let link = run_link(scenario, recirculations)?;
    Ok(ReportArtifacts {
        launch,
        fibre_out,
        fits,
        span_nli,
        link,
    })
}
