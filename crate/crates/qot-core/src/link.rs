//! Stage-chain composition of a transmission scenario: gain blocks, WSS/VOA
//! losses and pumped fibre spans, unrolled over N recirculations while
//! tracking per-channel signal, accumulated ASE and accumulated NLI.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::constants::PLANCK;
use crate::fmath;
use crate::gn::{nli_closed_form, nli_integral, ClosedFormConfig, IntegralConfig, NliError};
use crate::profile::{fit_exponentials, normalize_profile, FitError};
use crate::raman::{
    distributed_ase, solve_power_evolution, PumpSet, RamanSolverConfig, SolveError,
};
use crate::spectral::{
    db_to_linear, frequency_to_wavelength_nm, ChannelPlan, FibreSpec, SpectralTable, TableError,
};

/// Scalar or wavelength-dependent dB quantity.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValue {
    Scalar(f64),
    Table(SpectralTable),
}

impl SpectrumValue {
    pub fn eval_nm(&self, wavelength_nm: f64) -> Result<f64, TableError> {
        match self {
            SpectrumValue::Scalar(v) => Ok(*v),
            SpectrumValue::Table(t) => t.eval(wavelength_nm),
        }
    }

    pub fn covers(&self, wavelength_nm: f64) -> bool {
        match self {
            SpectrumValue::Scalar(_) => true,
            SpectrumValue::Table(t) => {
                t.covers(wavelength_nm) || t.extrapolation() == crate::spectral::Extrapolation::Clamp
            }
        }
    }
}

/// One element of the recirculating loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// Lumped repeater: amplifies signal, ASE and NLI, adds its own ASE
    /// h·f·(G·F−1)·B per channel (two-polarization convention).
    LumpedAmp {
        gain_db: SpectrumValue,
        noise_figure_db: SpectrumValue,
    },
    /// Flat or spectrally-shaped loss; attenuates everything.
    Loss { attenuation_db: SpectrumValue },
    /// Wavelength-selective switch: per-wavelength attenuation.
    Wss { attenuation_db: SpectralTable },
    /// Pumped fibre span: signal replaced by the Raman solve, ASE attenuated
    /// by the net span transmission then incremented by the distributed ASE,
    /// NLI attenuated likewise then incremented by the span NLI evaluated at
    /// the span input powers.
    FibreSpan { fibre: FibreSpec, pumps: PumpSet },
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::LumpedAmp { .. } => "amp",
            Stage::Loss { .. } => "loss",
            Stage::Wss { .. } => "wss",
            Stage::FibreSpan { .. } => "fibre_span",
        }
    }
}

/// Per-channel running quantities, all W in the channel bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub signal_w: Vec<f64>,
    pub ase_w: Vec<f64>,
    pub nli_w: Vec<f64>,
}

impl LinkState {
    pub fn launch(plan: &ChannelPlan) -> Self {
        Self {
            signal_w: plan.channels().iter().map(|c| c.launch_power).collect(),
            ase_w: vec![0.0; plan.len()],
            nli_w: vec![0.0; plan.len()],
        }
    }
}

/// How FibreSpan stages evaluate per-span NLI.
#[derive(Debug, Clone, PartialEq)]
pub enum NliTracking {
    Off,
    ClosedForm {
        fit_terms: usize,
        config: ClosedFormConfig,
    },
    Integral(IntegralConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub solver: RamanSolverConfig,
    pub nli: NliTracking,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            solver: RamanSolverConfig::default(),
            nli: NliTracking::ClosedForm {
                fit_terms: 4,
                config: ClosedFormConfig::default(),
            },
        }
    }
}

/// A full transmission scenario: plan, the ordered loop stages, the number
/// of recirculations and an optional measured transceiver-SNR table.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub plan: ChannelPlan,
    pub loop_stages: Vec<Stage>,
    pub recirculations: usize,
    pub trx_snr: Option<SpectralTable>,
    pub config: LinkConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageError {
    TableCoverage {
        stage_kind: &'static str,
        channel: usize,
        wavelength_nm: f64,
    },
    Table(TableError),
    Solve(SolveError),
    Nli(NliError),
    Fit(FitError),
    BadScenario(&'static str),
    AtRecirculation {
        recirculation: usize,
        stage: usize,
        source: Box<StageError>,
    },
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageError::TableCoverage {
                stage_kind,
                channel,
                wavelength_nm,
            } => write!(
                f,
                "stage '{stage_kind}' table does not cover channel {channel} at {wavelength_nm} nm"
            ),
            StageError::Table(e) => write!(f, "{e}"),
            StageError::Solve(e) => write!(f, "{e}"),
            StageError::Nli(e) => write!(f, "{e}"),
            StageError::Fit(e) => write!(f, "{e}"),
            StageError::BadScenario(what) => write!(f, "bad scenario: {what}"),
            StageError::AtRecirculation {
                recirculation,
                stage,
                source,
            } => write!(f, "recirculation {recirculation}, stage {stage}: {source}"),
        }
    }
}

impl core::error::Error for StageError {}

impl From<SolveError> for StageError {
    fn from(e: SolveError) -> Self {
        StageError::Solve(e)
    }
}

impl From<NliError> for StageError {
    fn from(e: NliError) -> Self {
        StageError::Nli(e)
    }
}

impl From<FitError> for StageError {
    fn from(e: FitError) -> Self {
        StageError::Fit(e)
    }
}

fn eval_for_channel(
    value: &SpectrumValue,
    stage_kind: &'static str,
    channel: usize,
    wavelength_nm: f64,
) -> Result<f64, StageError> {
    value
        .eval_nm(wavelength_nm)
        .map_err(|_| StageError::TableCoverage {
            stage_kind,
            channel,
            wavelength_nm,
        })
}

/// Apply one stage to a state, producing the new state.
pub fn apply_stage(
    state: &LinkState,
    stage: &Stage,
    plan: &ChannelPlan,
    config: &LinkConfig,
) -> Result<LinkState, StageError> {
    let n = plan.len();
    if state.signal_w.len() != n {
        return Err(StageError::BadScenario("state does not match plan"));
    }
    let wavelengths: Vec<f64> = plan
        .frequencies()
        .map(frequency_to_wavelength_nm)
        .collect();
    let mut next = state.clone();

    match stage {
        Stage::LumpedAmp {
            gain_db,
            noise_figure_db,
        } => {
            for i in 0..n {
                let g_db = eval_for_channel(gain_db, "amp", i, wavelengths[i])?;
                let nf_db = eval_for_channel(noise_figure_db, "amp", i, wavelengths[i])?;
                let g = db_to_linear(g_db).map_err(|_| StageError::BadScenario("non-finite gain"))?;
                let f_lin =
                    db_to_linear(nf_db).map_err(|_| StageError::BadScenario("non-finite NF"))?;
                let ch = &plan.channels()[i];
                let added = PLANCK * ch.center_frequency * (g * f_lin - 1.0).max(0.0)
                    * ch.symbol_rate;
                next.signal_w[i] *= g;
                next.ase_w[i] = next.ase_w[i] * g + added;
                next.nli_w[i] *= g;
            }
        }
        Stage::Loss { attenuation_db } => {
            for i in 0..n {
                let att_db = eval_for_channel(attenuation_db, "loss", i, wavelengths[i])?;
                let t = db_to_linear(-att_db)
                    .map_err(|_| StageError::BadScenario("non-finite attenuation"))?;
                next.signal_w[i] *= t;
                next.ase_w[i] *= t;
                next.nli_w[i] *= t;
            }
        }
        Stage::Wss { attenuation_db } => {
            for i in 0..n {
                let att_db = attenuation_db
                    .eval(wavelengths[i])
                    .map_err(|_| StageError::TableCoverage {
                        stage_kind: "wss",
                        channel: i,
                        wavelength_nm: wavelengths[i],
                    })?;
                let t = db_to_linear(-att_db)
                    .map_err(|_| StageError::BadScenario("non-finite attenuation"))?;
                next.signal_w[i] *= t;
                next.ase_w[i] *= t;
                next.nli_w[i] *= t;
            }
        }
        Stage::FibreSpan { fibre, pumps } => {
            let plan_now = plan
                .with_powers(&state.signal_w)
                .map_err(|_| StageError::BadScenario("non-positive signal power at span input"))?;
            let profiles = solve_power_evolution(fibre, &plan_now, pumps, &config.solver)?;
            let span_ase = distributed_ase(fibre, &profiles, &plan_now, &config.solver)?;

            let span_nli: Vec<f64> = match &config.nli {
                NliTracking::Off => vec![0.0; n],
                NliTracking::ClosedForm { fit_terms, config: cf } => {
                    let fits: Result<Vec<_>, FitError> = (0..n)
                        .map(|i| {
                            let rho = normalize_profile(&profiles, i)?;
                            fit_exponentials(profiles.z_grid(), &rho, *fit_terms)
                        })
                        .collect();
                    let result =
                        nli_closed_form(fibre, &plan_now, &fits?, fibre.length_km, cf)?;
                    result.channels.iter().map(|c| c.nli_w).collect()
                }
                NliTracking::Integral(icfg) => {
                    let exhaustive = IntegralConfig {
                        channel_stride: 1,
                        ..*icfg
                    };
                    let result = nli_integral(fibre, &plan_now, &profiles, &exhaustive)?;
                    result.channels.iter().map(|c| c.nli_w).collect()
                }
            };

            for i in 0..n {
                let trans = profiles.net_transmission(i);
                next.signal_w[i] = profiles.signal_output(i);
                next.ase_w[i] = next.ase_w[i] * trans + span_ase[i];
                // The GN result is referred to the span input; the physical
                // noise at the span output rides the signal, i.e. carries the
                // same net transmission. Without this factor a transparent
                // loop would not accumulate NLI linearly.
                next.nli_w[i] = (next.nli_w[i] + span_nli[i]) * trans;
            }
        }
    }
    Ok(next)
}

/// Scenario validation: hard errors for tables that do not cover the plan,
/// warnings for physically suspicious values (noise figure below the
/// configured threshold).
pub fn validate_scenario(
    scenario: &LinkScenario,
    nf_warn_threshold_db: f64,
) -> Result<Vec<String>, StageError> {
    use alloc::format;

    if scenario.recirculations < 1 {
        return Err(StageError::BadScenario("recirculations must be at least 1"));
    }
    let wavelengths: Vec<f64> = scenario
        .plan
        .frequencies()
        .map(frequency_to_wavelength_nm)
        .collect();
    let mut warnings = Vec::new();

    if let Some(t) = &scenario.trx_snr {
        for (i, &nm) in wavelengths.iter().enumerate() {
            if t.eval(nm).is_err() {
                return Err(StageError::TableCoverage {
                    stage_kind: "trx_snr",
                    channel: i,
                    wavelength_nm: nm,
                });
            }
        }
    }

    for (s_idx, stage) in scenario.loop_stages.iter().enumerate() {
        match stage {
            Stage::LumpedAmp {
                gain_db,
                noise_figure_db,
            } => {
                for (i, &nm) in wavelengths.iter().enumerate() {
                    eval_for_channel(gain_db, "amp", i, nm)?;
                    let nf = eval_for_channel(noise_figure_db, "amp", i, nm)?;
                    if nf < nf_warn_threshold_db {
                        warnings.push(format!(
                            "stage {s_idx} (amp): noise figure {nf:.2} dB at {nm:.1} nm is below \
                             the {nf_warn_threshold_db} dB threshold"
                        ));
                        break;
                    }
                }
            }
            Stage::Loss { attenuation_db } => {
                for (i, &nm) in wavelengths.iter().enumerate() {
                    eval_for_channel(attenuation_db, "loss", i, nm)?;
                }
            }
            Stage::Wss { attenuation_db } => {
                for (i, &nm) in wavelengths.iter().enumerate() {
                    if attenuation_db.eval(nm).is_err() {
                        return Err(StageError::TableCoverage {
                            stage_kind: "wss",
                            channel: i,
                            wavelength_nm: nm,
                        });
                    }
                }
            }
            Stage::FibreSpan { fibre, pumps } => {
                fibre
                    .validate()
                    .map_err(|_| StageError::BadScenario("invalid fibre spec"))?;
                for (i, ch) in scenario.plan.channels().iter().enumerate() {
                    if fibre.attenuation_per_km(ch.center_frequency).is_err() {
                        return Err(StageError::TableCoverage {
                            stage_kind: "fibre_span",
                            channel: i,
                            wavelength_nm: wavelengths[i],
                        });
                    }
                }
                for p in pumps.pumps() {
                    if !fibre.attenuation.covers(p.wavelength_nm) {
                        return Err(StageError::BadScenario(
                            "pump wavelength outside the attenuation table",
                        ));
                    }
                }
            }
        }
    }
    Ok(warnings)
}

/// Run the scenario: launch state, loop stages applied in order N times,
/// returning the state after each recirculation.
pub fn run_scenario(scenario: &LinkScenario) -> Result<Vec<LinkState>, StageError> {
    if scenario.recirculations < 1 {
        return Err(StageError::BadScenario("recirculations must be at least 1"));
    }
    let mut state = LinkState::launch(&scenario.plan);
    let mut trace = Vec::with_capacity(scenario.recirculations);
    for recirculation in 0..scenario.recirculations {
        for (stage_idx, stage) in scenario.loop_stages.iter().enumerate() {
            state = apply_stage(&state, stage, &scenario.plan, &scenario.config).map_err(|e| {
                StageError::AtRecirculation {
                    recirculation,
                    stage: stage_idx,
                    source: Box::new(e),
                }
            })?;
        }
        trace.push(state.clone());
    }
    Ok(trace)
}

/// One row of a spectrum snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRecord {
    pub wavelength_nm: f64,
    pub signal_dbm: f64,
    pub ase_dbm: f64,
    pub nli_dbm: f64,
}

/// dBm floor reported for zero/non-positive powers.
pub const DBM_FLOOR: f64 = -120.0;

fn to_dbm_floored(power_w: f64) -> f64 {
    if power_w <= 0.0 {
        return DBM_FLOOR;
    }
    let dbm = 10.0 * fmath::log10(power_w * 1e3);
    dbm.max(DBM_FLOOR)
}

/// Project a state onto (wavelength, signal dBm, ASE dBm, NLI dBm) records.
pub fn snapshot_spectrum(state: &LinkState, plan: &ChannelPlan) -> Vec<SpectrumRecord> {
    plan.frequencies()
        .zip(state.signal_w.iter().zip(state.ase_w.iter().zip(&state.nli_w)))
        .map(|(f, (&sig, (&ase, &nli)))| SpectrumRecord {
            wavelength_nm: frequency_to_wavelength_nm(f),
            signal_dbm: to_dbm_floored(sig),
            ase_dbm: to_dbm_floored(ase),
            nli_dbm: to_dbm_floored(nli),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{AxisUnit, Extrapolation, Modulation};

    fn plan2() -> ChannelPlan {
        ChannelPlan::uniform_grid(193.4e12, 32.5e9, 2, 32e9, 1e-3, Modulation::Qam64).unwrap()
    }

    fn config_no_nli() -> LinkConfig {
        LinkConfig {
            nli: NliTracking::Off,
            ..Default::default()
        }
    }

    #[test]
    fn unity_gain_ideal_amp_is_identity() {
        let plan = plan2();
        let state = LinkState::launch(&plan);
        let stage = Stage::LumpedAmp {
            gain_db: SpectrumValue::Scalar(0.0),
            noise_figure_db: SpectrumValue::Scalar(0.0),
        };
        let next = apply_stage(&state, &stage, &plan, &config_no_nli()).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn amp_ase_matches_hand_formula() {
        // G = 20 dB, NF = 5 dB, B = 32 GHz, f = 193.4 THz:
        // h·f·(10²·10^0.5 − 1)·32e9 ≈ 1.2927e-6 W.
        let plan =
            ChannelPlan::uniform_grid(193.4e12, 32.5e9, 1, 32e9, 1e-3, Modulation::Qam64).unwrap();
        let state = LinkState::launch(&plan);
        let stage = Stage::LumpedAmp {
            gain_db: SpectrumValue::Scalar(20.0),
            noise_figure_db: SpectrumValue::Scalar(5.0),
        };
        let next = apply_stage(&state, &stage, &plan, &config_no_nli()).unwrap();
        assert!(
            (next.ase_w[0] - 1.2927e-6).abs() < 1e-4 * 1.2927e-6,
            "added ASE {}",
            next.ase_w[0]
        );
        assert!((next.signal_w[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wss_flat_seven_db() {
        let plan = plan2();
        let mut state = LinkState::launch(&plan);
        state.ase_w = alloc::vec![1e-6, 1e-6];
        state.nli_w = alloc::vec![1e-7, 1e-7];
        let stage = Stage::Wss {
            attenuation_db: SpectralTable::flat(AxisUnit::Nm, 1200.0, 1700.0, 7.0).unwrap(),
        };
        let next = apply_stage(&state, &stage, &plan, &config_no_nli()).unwrap();
        let t = db_to_linear(-7.0).unwrap();
        for i in 0..2 {
            assert!((next.signal_w[i] - state.signal_w[i] * t).abs() < 1e-18);
            assert!((next.ase_w[i] - state.ase_w[i] * t).abs() < 1e-18);
            assert!((next.nli_w[i] - state.nli_w[i] * t).abs() < 1e-18);
        }
    }

    #[test]
    fn loss_chain_composes_to_summed_db() {
        let plan = plan2();
        let mut state = LinkState::launch(&plan);
        state.ase_w = alloc::vec![1e-6, 2e-6];
        let cfg = config_no_nli();
        let mut chained = state.clone();
        for db in [3.0, 4.5, 2.5] {
            chained = apply_stage(
                &chained,
                &Stage::Loss {
                    attenuation_db: SpectrumValue::Scalar(db),
                },
                &plan,
                &cfg,
            )
            .unwrap();
        }
        let single = apply_stage(
            &state,
            &Stage::Loss {
                attenuation_db: SpectrumValue::Scalar(10.0),
            },
            &plan,
            &cfg,
        )
        .unwrap();
        for i in 0..2 {
            assert!(
                (chained.signal_w[i] - single.signal_w[i]).abs() <= 1e-12 * single.signal_w[i]
            );
            assert!((chained.ase_w[i] - single.ase_w[i]).abs() <= 1e-12 * single.ase_w[i]);
        }
    }

    #[test]
    fn amp_loss_order_changes_ase_not_signal() {
        let plan = plan2();
        let state = LinkState::launch(&plan);
        let cfg = config_no_nli();
        let amp = Stage::LumpedAmp {
            gain_db: SpectrumValue::Scalar(10.0),
            noise_figure_db: SpectrumValue::Scalar(5.0),
        };
        let loss = Stage::Loss {
            attenuation_db: SpectrumValue::Scalar(10.0),
        };
        let amp_first =
            apply_stage(&apply_stage(&state, &amp, &plan, &cfg).unwrap(), &loss, &plan, &cfg)
                .unwrap();
        let loss_first =
            apply_stage(&apply_stage(&state, &loss, &plan, &cfg).unwrap(), &amp, &plan, &cfg)
                .unwrap();
        for i in 0..2 {
            assert!(
                (amp_first.signal_w[i] - loss_first.signal_w[i]).abs()
                    <= 1e-12 * amp_first.signal_w[i]
            );
            // Amp-then-loss attenuates the added ASE; loss-then-amp does not.
            assert!(amp_first.ase_w[i] < loss_first.ase_w[i] * 0.2);
        }
    }

    #[test]
    fn empty_scenario_returns_launch_state() {
        let plan = plan2();
        let scenario = LinkScenario {
            plan: plan.clone(),
            loop_stages: Vec::new(),
            recirculations: 1,
            trx_snr: None,
            config: config_no_nli(),
        };
        let trace = run_scenario(&scenario).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0], LinkState::launch(&plan));
    }

    #[test]
    fn transparent_loop_linear_ase_and_recirculation_ratio() {
        let plan = plan2();
        let scenario = |n: usize| LinkScenario {
            plan: plan.clone(),
            loop_stages: alloc::vec![
                Stage::Loss {
                    attenuation_db: SpectrumValue::Scalar(10.0),
                },
                Stage::LumpedAmp {
                    gain_db: SpectrumValue::Scalar(10.0),
                    noise_figure_db: SpectrumValue::Scalar(5.0),
                },
            ],
            recirculations: n,
            trx_snr: None,
            config: config_no_nli(),
        };
        let trace = run_scenario(&scenario(15)).unwrap();
        let launch = LinkState::launch(&plan);
        // Signal returns to launch after every recirculation.
        for state in &trace {
            for i in 0..plan.len() {
                assert!(
                    (state.signal_w[i] - launch.signal_w[i]).abs()
                        <= 1e-9 * launch.signal_w[i]
                );
            }
        }
        // ASE grows exactly linearly in N.
        let a1 = trace[0].ase_w[0];
        for (k, state) in trace.iter().enumerate() {
            let want = a1 * (k + 1) as f64;
            assert!(
                (state.ase_w[0] - want).abs() <= 1e-9 * want,
                "recirculation {}: {} vs {}",
                k + 1,
                state.ase_w[0],
                want
            );
        }
        // ASE-limited SNR drops by 10·log10(3) between 5 and 15 loops.
        let snr = |s: &LinkState| 10.0 * (s.signal_w[0] / s.ase_w[0]).log10();
        let drop = snr(&trace[4]) - snr(&trace[14]);
        assert!((drop - 10.0 * 3.0_f64.log10()).abs() < 1e-6, "drop {drop}");
    }

    #[test]
    fn signal_trace_independent_of_nli_tracking() {
        use crate::spectral::FibreSpec;
        let fibre = FibreSpec {
            length_km: 40.0,
            attenuation: SpectralTable::flat(AxisUnit::Nm, 1300.0, 1700.0, 0.2).unwrap(),
            raman_gain: SpectralTable::from_pairs(
                AxisUnit::Thz,
                &[(0.0, 0.0), (13.2, 0.42), (26.0, 0.0)],
                Extrapolation::Clamp,
            )
            .unwrap(),
            gamma_per_w_km: 1.4,
            effective_area_um2: 83.0,
            dispersion_ps_nm_km: 16.5,
            dispersion_slope_ps_nm2_km: 0.09,
            reference_wavelength_nm: 1550.0,
        };
        let plan =
            ChannelPlan::uniform_grid(193.4e12, 32.5e9, 3, 32e9, 1e-3, Modulation::Qam64).unwrap();
        let base = LinkScenario {
            plan,
            loop_stages: alloc::vec![Stage::FibreSpan {
                fibre,
                pumps: PumpSet::none(),
            }],
            recirculations: 2,
            trx_snr: None,
            config: config_no_nli(),
        };
        let mut with_nli = base.clone();
        with_nli.config.nli = NliTracking::ClosedForm {
            fit_terms: 2,
            config: ClosedFormConfig::default(),
        };
        let a = run_scenario(&base).unwrap();
        let b = run_scenario(&with_nli).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.signal_w, sb.signal_w);
            assert_eq!(sa.ase_w, sb.ase_w);
        }
        assert!(b[0].nli_w.iter().all(|&v| v > 0.0));
        assert!(a[0].nli_w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snapshot_floors_zero_powers() {
        let plan = plan2();
        let state = LinkState::launch(&plan);
        let records = snapshot_spectrum(&state, &plan);
        assert_eq!(records.len(), 2);
        for r in &records {
            assert_eq!(r.ase_dbm, DBM_FLOOR);
            assert_eq!(r.nli_dbm, DBM_FLOOR);
            assert!((r.signal_dbm - 0.0).abs() < 1e-9); // 1 mW
        }
        // Wavelengths descend as frequency ascends.
        assert!(records[0].wavelength_nm > records[1].wavelength_nm);
    }

    #[test]
    fn stage_coverage_error_names_channel_and_stage() {
        let plan = plan2();
        let state = LinkState::launch(&plan);
        let stage = Stage::Wss {
            attenuation_db: SpectralTable::from_pairs(
                AxisUnit::Nm,
                &[(1400.0, 3.0), (1500.0, 3.0)],
                Extrapolation::Error,
            )
            .unwrap(),
        };
        match apply_stage(&state, &stage, &plan, &config_no_nli()) {
            Err(StageError::TableCoverage {
                stage_kind: "wss",
                channel,
                ..
            }) => assert_eq!(channel, 0),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn validate_flags_low_noise_figure() {
        let plan = plan2();
        let scenario = LinkScenario {
            plan,
            loop_stages: alloc::vec![Stage::LumpedAmp {
                gain_db: SpectrumValue::Scalar(10.0),
                noise_figure_db: SpectrumValue::Scalar(1.5),
            }],
            recirculations: 1,
            trx_snr: None,
            config: config_no_nli(),
        };
        let warnings = validate_scenario(&scenario, 3.0).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("noise figure"));
    }
}
