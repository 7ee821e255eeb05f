//! Coupled Raman power evolution over one fibre span: co-propagating signals,
//! counter-propagating pumps, pump depletion, pump–pump and signal–signal
//! ISRS, and spontaneous-Raman (distributed) ASE.
//!
//! Each wave obeys
//!
//! dP_i/dz = σ_i · P_i · ( −α(f_i) + Σ_{j≠i} s_ij · g_r(|f_j−f_i|) · P_j )
//!
//! with σ_i = +1 for forward waves and −1 for backward waves, s_ij = +1 when
//! f_j > f_i (wave i is pumped by j) and s_ij = −f_i/f_j when f_j < f_i (wave
//! i is depleted, photon-number-conserving frequency ratio). Signals carry
//! boundary values at z = 0, backward pumps at z = L; the two-point boundary
//! value problem is solved by alternating backward-pump / forward-signal
//! sweeps until a joint re-integration reproduces the pump boundary within
//! the configured tolerance.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::constants::{BOLTZMANN, PLANCK};
use crate::fmath;
use crate::ode::{integrate_on_grid, OdeError, OdeOptions};
use crate::spectral::{wavelength_nm_to_frequency, ChannelPlan, FibreSpec};

/// Propagation direction relative to the signals' +z axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One Raman pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pump {
    pub wavelength_nm: f64,
    pub power_w: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    InvalidPump { index: usize, reason: &'static str },
    FrequencyOutsideTables { f_hz: f64 },
    NonConvergence { iterations: usize, mismatch: f64 },
    NegativePower { z_km: f64 },
    Integrator(OdeError),
    ProfileMismatch(&'static str),
    BadConfig(&'static str),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::InvalidPump { index, reason } => write!(f, "pump {index}: {reason}"),
            SolveError::FrequencyOutsideTables { f_hz } => {
                write!(f, "frequency {f_hz} Hz outside the attenuation table range")
            }
            SolveError::NonConvergence {
                iterations,
                mismatch,
            } => write!(
                f,
                "boundary-value iteration did not converge after {iterations} iterations \
                 (last relative boundary mismatch {mismatch:.3e})"
            ),
            SolveError::NegativePower { z_km } => {
                write!(f, "step-size underflow near z = {z_km} km (negative power)")
            }
            SolveError::Integrator(e) => write!(f, "integrator: {e}"),
            SolveError::ProfileMismatch(what) => write!(f, "profile mismatch: {what}"),
            SolveError::BadConfig(what) => write!(f, "bad solver config: {what}"),
        }
    }
}

impl core::error::Error for SolveError {}

/// Set of Raman pumps. Zero-power pumps are accepted and ignored by the
/// solver.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PumpSet {
    pumps: Vec<Pump>,
}

impl PumpSet {
    pub fn new(pumps: Vec<Pump>) -> Result<Self, SolveError> {
        for (index, p) in pumps.iter().enumerate() {
            if !(p.power_w >= 0.0) || !p.power_w.is_finite() {
                return Err(SolveError::InvalidPump {
                    index,
                    reason: "power must be finite and non-negative",
                });
            }
            if !(p.wavelength_nm > 0.0) {
                return Err(SolveError::InvalidPump {
                    index,
                    reason: "wavelength must be positive",
                });
            }
            if pumps[..index]
                .iter()
                .any(|q| q.wavelength_nm == p.wavelength_nm)
            {
                return Err(SolveError::InvalidPump {
                    index,
                    reason: "duplicate wavelength",
                });
            }
        }
        Ok(Self { pumps })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn pumps(&self) -> &[Pump] {
        &self.pumps
    }

    pub fn total_power_w(&self) -> f64 {
        self.pumps.iter().map(|p| p.power_w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    Signal,
    Pump,
}

/// Power-vs-distance record for one wave, in the signal coordinate frame
/// (backward-pump boundary values apply at z = L).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub frequency: f64,
    pub kind: WaveKind,
    pub direction: Direction,
    pub power_vs_z: Vec<f64>,
}

/// Solved per-wave power profiles over one span.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfileSet {
    z_grid: Vec<f64>,
    waves: Vec<WaveProfile>,
    n_signals: usize,
}

impl PowerProfileSet {
    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn span_length_km(&self) -> f64 {
        self.z_grid[self.z_grid.len() - 1]
    }

    pub fn waves(&self) -> &[WaveProfile] {
        &self.waves
    }

    pub fn n_signals(&self) -> usize {
        self.n_signals
    }

    pub fn signals(&self) -> &[WaveProfile] {
        &self.waves[..self.n_signals]
    }

    pub fn pumps(&self) -> &[WaveProfile] {
        &self.waves[self.n_signals..]
    }

    pub fn signal(&self, channel: usize) -> &WaveProfile {
        &self.waves[channel]
    }

    /// Launch power of a signal channel, W.
    pub fn signal_launch(&self, channel: usize) -> f64 {
        self.waves[channel].power_vs_z[0]
    }

    /// Span output power of a signal channel, W.
    pub fn signal_output(&self, channel: usize) -> f64 {
        *self.waves[channel].power_vs_z.last().unwrap()
    }

    /// P(L)/P(0) for a signal channel.
    pub fn net_transmission(&self, channel: usize) -> f64 {
        self.signal_output(channel) / self.signal_launch(channel)
    }
}

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanSolverConfig {
    /// Output grid spacing cap, km.
    pub z_step_max_km: f64,
    /// Relative boundary mismatch accepted by the BVP iteration.
    pub bvp_tolerance: f64,
    pub max_iterations: usize,
    /// When false, signals do not deplete pumps (pump–pump ISRS stays on).
    pub include_pump_depletion: bool,
    /// Disable all wave–wave Raman coupling (diagnostics).
    pub include_isrs: bool,
    /// Fibre temperature for the spontaneous-Raman phonon factor, K.
    pub temperature_k: f64,
    /// Integrator error controls.
    pub rtol: f64,
    pub atol: f64,
}

impl Default for RamanSolverConfig {
    fn default() -> Self {
        Self {
            z_step_max_km: 0.1,
            bvp_tolerance: 1e-4,
            max_iterations: 50,
            include_pump_depletion: true,
            include_isrs: true,
            temperature_k: 298.0,
            rtol: 1e-9,
            atol: 1e-18,
        }
    }
}

impl RamanSolverConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.z_step_max_km > 0.0) {
            return Err(SolveError::BadConfig("z_step_max must be positive"));
        }
        if !(self.bvp_tolerance > 0.0) {
            return Err(SolveError::BadConfig("bvp_tolerance must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(SolveError::BadConfig("max_iterations must be at least 1"));
        }
        if !(self.temperature_k >= 0.0) {
            return Err(SolveError::BadConfig("temperature must be non-negative"));
        }
        Ok(())
    }

    fn ode_options(&self, enforce_positive: bool) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            enforce_positive,
            ..OdeOptions::default()
        }
    }
}

struct WaveSetup {
    frequency: f64,
    kind: WaveKind,
    direction: Direction,
    boundary_power: f64,
}

/// Dense pairwise coupling: alpha[i] in 1/km and m[i*n+j] = s_ij g_r in
/// 1/(W·km).
struct Coupling {
    n: usize,
    alpha: Vec<f64>,
    m: Vec<f64>,
}

fn build_coupling(
    fibre: &FibreSpec,
    waves: &[WaveSetup],
    cfg: &RamanSolverConfig,
) -> Result<Coupling, SolveError> {
    let n = waves.len();
    let mut alpha = vec![0.0; n];
    for (i, w) in waves.iter().enumerate() {
        alpha[i] = fibre
            .attenuation_per_km(w.frequency)
            .map_err(|_| SolveError::FrequencyOutsideTables { f_hz: w.frequency })?;
    }
    let mut m = vec![0.0; n * n];
    if cfg.include_isrs {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if !cfg.include_pump_depletion
                    && waves[i].kind == WaveKind::Pump
                    && waves[j].kind == WaveKind::Signal
                {
                    continue;
                }
                let fi = waves[i].frequency;
                let fj = waves[j].frequency;
                let g = fibre.raman_gain_at_separation((fj - fi).abs());
                if g == 0.0 {
                    continue;
                }
                let s = if fj > fi { 1.0 } else { -fi / fj };
                m[i * n + j] = s * g;
            }
        }
    }
    Ok(Coupling { n, alpha, m })
}

/// Uniform output grid 0..=length with spacing ≤ z_step_max.
fn make_grid(length_km: f64, z_step_max_km: f64) -> Vec<f64> {
    let cells = fmath::ceil(length_km / z_step_max_km).max(1.0) as usize;
    let h = length_km / cells as f64;
    let mut grid: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    grid[cells] = length_km;
    grid
}

/// Integrate a subset of waves over `grid` in their own travel coordinate,
/// holding the other waves frozen. `frozen_nodes[a][k]` is the
/// pre-accumulated coupling term Σ_{j frozen} m[active_a][j] P_j at node k,
/// already expressed in the integration coordinate.
fn integrate_subset(
    coupling: &Coupling,
    active: &[usize],
    frozen_nodes: &[Vec<f64>],
    y0: &[f64],
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>, SolveError> {
    let n_active = active.len();
    let h = grid[1] - grid[0];
    let n_cells = grid.len() - 1;
    let rhs = |z: f64, y: &[f64], dy: &mut [f64]| {
        let cell = ((z / h) as usize).min(n_cells - 1);
        let w = ((z - grid[cell]) / h).clamp(0.0, 1.0);
        for (a, &i) in active.iter().enumerate() {
            let row = &coupling.m[i * coupling.n..(i + 1) * coupling.n];
            let mut gain = -coupling.alpha[i];
            for (b, &j) in active.iter().enumerate() {
                gain += row[j] * y[b];
            }
            let f = &frozen_nodes[a];
            gain += (1.0 - w) * f[cell] + w * f[cell + 1];
            dy[a] = y[a] * gain;
        }
    };
    let sol = integrate_on_grid(rhs, y0, grid, opts).map_err(|e| match e {
        OdeError::StepSizeUnderflow { x, .. } if opts.enforce_positive => {
            SolveError::NegativePower { z_km: x }
        }
        other => SolveError::Integrator(other),
    })?;
    let mut out = vec![vec![0.0; grid.len()]; n_active];
    for (k, row) in sol.iter().enumerate() {
        for a in 0..n_active {
            out[a][k] = row[a];
        }
    }
    Ok(out)
}

/// Joint integration of every wave in the signal frame with per-wave
/// transport signs. Used for single-direction systems and to verify the BVP
/// solution.
fn integrate_joint(
    coupling: &Coupling,
    signs: &[f64],
    y0: &[f64],
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>, SolveError> {
    let rhs = |_z: f64, y: &[f64], dy: &mut [f64]| {
        let n = coupling.n;
        for i in 0..n {
            let row = &coupling.m[i * n..(i + 1) * n];
            let mut gain = -coupling.alpha[i];
            for j in 0..n {
                gain += row[j] * y[j];
            }
            dy[i] = signs[i] * y[i] * gain;
        }
    };
    integrate_on_grid(rhs, y0, grid, opts).map_err(|e| match e {
        OdeError::StepSizeUnderflow { x, .. } if opts.enforce_positive => {
            SolveError::NegativePower { z_km: x }
        }
        other => SolveError::Integrator(other),
    })
}

/// Pre-accumulate Σ_j m[i][j] P_j(z) at every grid node for the frozen waves,
/// optionally mirroring the z axis (for backward sweeps).
fn frozen_contributions(
    coupling: &Coupling,
    active: &[usize],
    frozen: &[usize],
    profiles: &[Vec<f64>],
    mirror: bool,
) -> Vec<Vec<f64>> {
    let n_nodes = profiles.first().map_or(0, |p| p.len());
    active
        .iter()
        .map(|&i| {
            let row = &coupling.m[i * coupling.n..(i + 1) * coupling.n];
            (0..n_nodes)
                .map(|k| {
                    let node = if mirror { n_nodes - 1 - k } else { k };
                    frozen.iter().map(|&j| row[j] * profiles[j][node]).sum()
                })
                .collect()
        })
        .collect()
}

/// Solve the coupled power-evolution equations for one span.
///
/// Signals take their boundary values from the plan at z = 0, backward pumps
/// at z = L. The returned profiles satisfy both boundaries to within
/// `cfg.bvp_tolerance`, verified by a joint re-integration of the full
/// coupled system.
pub fn solve_power_evolution(
    fibre: &FibreSpec,
    plan: &ChannelPlan,
    pumps: &PumpSet,
    cfg: &RamanSolverConfig,
) -> Result<PowerProfileSet, SolveError> {
    cfg.validate()?;

    let mut waves: Vec<WaveSetup> = plan
        .channels()
        .iter()
        .map(|c| WaveSetup {
            frequency: c.center_frequency,
            kind: WaveKind::Signal,
            direction: Direction::Forward,
            boundary_power: c.launch_power,
        })
        .collect();
    let n_signals = waves.len();
    for p in pumps.pumps() {
        if p.power_w > 0.0 {
            waves.push(WaveSetup {
                frequency: wavelength_nm_to_frequency(p.wavelength_nm),
                kind: WaveKind::Pump,
                direction: p.direction,
                boundary_power: p.power_w,
            });
        }
    }

    let coupling = build_coupling(fibre, &waves, cfg)?;
    let grid = make_grid(fibre.length_km, cfg.z_step_max_km);
    let n = waves.len();
    let n_nodes = grid.len();
    let length = fibre.length_km;

    let forward: Vec<usize> = (0..n)
        .filter(|&i| waves[i].direction == Direction::Forward)
        .collect();
    let backward: Vec<usize> = (0..n)
        .filter(|&i| waves[i].direction == Direction::Backward)
        .collect();

    // Initial guess: attenuation-only decay from each wave's own boundary.
    let mut profiles: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let a = coupling.alpha[i];
            let p0 = waves[i].boundary_power;
            grid.iter()
                .map(|&z| match waves[i].direction {
                    Direction::Forward => p0 * fmath::exp(-a * z),
                    Direction::Backward => p0 * fmath::exp(-a * (length - z)),
                })
                .collect()
        })
        .collect();

    let opts = cfg.ode_options(true);

    let finish = |grid: Vec<f64>, profiles: Vec<Vec<f64>>| -> PowerProfileSet {
        let wave_profiles = waves
            .iter()
            .zip(profiles)
            .map(|(w, power_vs_z)| WaveProfile {
                frequency: w.frequency,
                kind: w.kind,
                direction: w.direction,
                power_vs_z,
            })
            .collect();
        PowerProfileSet {
            z_grid: grid,
            waves: wave_profiles,
            n_signals,
        }
    };

    if backward.is_empty() {
        // Pure initial-value problem: one joint forward integration.
        let y0: Vec<f64> = waves.iter().map(|w| w.boundary_power).collect();
        let signs = vec![1.0; n];
        let sol = integrate_joint(&coupling, &signs, &y0, &grid, &opts)?;
        for k in 0..n_nodes {
            for i in 0..n {
                profiles[i][k] = sol[k][i];
            }
        }
        return Ok(finish(grid, profiles));
    }

    let mut last_metrics: Option<Vec<f64>> = None;
    let mut last_mismatch = f64::INFINITY;
    // Strong pump–signal coupling makes the bare alternating map oscillate;
    // under-relax the pump update in the log domain and adapt the factor to
    // the observed contraction.
    let mut relaxation = 0.4_f64;
    let mut prev_delta = f64::INFINITY;
    let mut verify_below = cfg.bvp_tolerance;

    for iteration in 1..=cfg.max_iterations {
        // Backward sweep in u = L − z from the z = L boundary values.
        let frozen_b = frozen_contributions(&coupling, &backward, &forward, &profiles, true);
        let y0_b: Vec<f64> = backward.iter().map(|&i| waves[i].boundary_power).collect();
        let sol_b = integrate_subset(&coupling, &backward, &frozen_b, &y0_b, &grid, &opts)?;
        for (a, &i) in backward.iter().enumerate() {
            for k in 0..n_nodes {
                let fresh = sol_b[a][n_nodes - 1 - k];
                let old = profiles[i][k];
                profiles[i][k] = if iteration == 1 {
                    fresh
                } else {
                    fmath::exp(
                        (1.0 - relaxation) * fmath::ln(old) + relaxation * fmath::ln(fresh),
                    )
                };
            }
            // The boundary value itself is never relaxed away.
            profiles[i][n_nodes - 1] = waves[i].boundary_power;
        }

        // Forward sweep from the launch values with fresh pump profiles.
        let frozen_f = frozen_contributions(&coupling, &forward, &backward, &profiles, false);
        let y0_f: Vec<f64> = forward.iter().map(|&i| waves[i].boundary_power).collect();
        let sol_f = integrate_subset(&coupling, &forward, &frozen_f, &y0_f, &grid, &opts)?;
        for (a, &i) in forward.iter().enumerate() {
            profiles[i].clone_from(&sol_f[a]);
        }

        // Fixed-point metric: forward outputs at L, backward values at 0.
        let metrics: Vec<f64> = forward
            .iter()
            .map(|&i| profiles[i][n_nodes - 1])
            .chain(backward.iter().map(|&i| profiles[i][0]))
            .collect();
        let delta = match &last_metrics {
            None => f64::INFINITY,
            Some(prev) => metrics
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
                .fold(0.0, f64::max),
        };
        last_metrics = Some(metrics);
        #[cfg(feature = "std")]
        if std::env::var_os("QOT_TRACE_BVP").is_some() {
            std::eprintln!(
                "bvp iteration {iteration}: delta {delta:.3e} relaxation {relaxation:.3}"
            );
        }

        // Adapt the relaxation to the observed behaviour.
        if delta > prev_delta {
            relaxation = (relaxation * 0.6).max(0.05);
        } else if delta < 0.6 * prev_delta {
            relaxation = (relaxation * 1.3).min(0.9);
        }
        prev_delta = delta;

        // The forward re-integration amplifies any residual inconsistency by
        // roughly e^(αL), so only verify once the fixed point has settled
        // well below the boundary tolerance (or on the last iteration).
        if delta <= verify_below / 30.0 || iteration == cfg.max_iterations {
            let signs: Vec<f64> = waves
                .iter()
                .map(|w| match w.direction {
                    Direction::Forward => 1.0,
                    Direction::Backward => -1.0,
                })
                .collect();
            let y0: Vec<f64> = (0..n).map(|i| profiles[i][0]).collect();
            let joint = integrate_joint(&coupling, &signs, &y0, &grid, &opts)?;
            let mismatch = backward
                .iter()
                .map(|&i| {
                    let got = joint[n_nodes - 1][i];
                    let want = waves[i].boundary_power;
                    (got - want).abs() / want.abs().max(1e-300)
                })
                .fold(0.0, f64::max);
            last_mismatch = mismatch;
            if mismatch <= cfg.bvp_tolerance {
                return Ok(finish(grid, profiles));
            }
            // Demand a tighter fixed point before trying again.
            verify_below = (verify_below / 10.0).max(1e-14);
        }
    }

    Err(SolveError::NonConvergence {
        iterations: cfg.max_iterations,
        mismatch: last_mismatch,
    })
}

/// Re-integrate the full coupled system forward from a solved profile set's
/// z = 0 values and report the worst relative mismatch against the boundary
/// conditions (backward-wave values at z = L, plus the forward outputs
/// against the profiles themselves).
pub fn boundary_mismatch(
    fibre: &FibreSpec,
    plan: &ChannelPlan,
    pumps: &PumpSet,
    profiles: &PowerProfileSet,
    cfg: &RamanSolverConfig,
) -> Result<f64, SolveError> {
    cfg.validate()?;
    let mut waves: Vec<WaveSetup> = plan
        .channels()
        .iter()
        .map(|c| WaveSetup {
            frequency: c.center_frequency,
            kind: WaveKind::Signal,
            direction: Direction::Forward,
            boundary_power: c.launch_power,
        })
        .collect();
    for p in pumps.pumps() {
        if p.power_w > 0.0 {
            waves.push(WaveSetup {
                frequency: wavelength_nm_to_frequency(p.wavelength_nm),
                kind: WaveKind::Pump,
                direction: p.direction,
                boundary_power: p.power_w,
            });
        }
    }
    if waves.len() != profiles.waves().len() {
        return Err(SolveError::ProfileMismatch(
            "profiles do not match the plan and pump set",
        ));
    }
    let coupling = build_coupling(fibre, &waves, cfg)?;
    let grid = profiles.z_grid();
    let n_nodes = grid.len();
    let signs: Vec<f64> = waves
        .iter()
        .map(|w| match w.direction {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        })
        .collect();
    let y0: Vec<f64> = profiles.waves().iter().map(|w| w.power_vs_z[0]).collect();
    let joint = integrate_joint(&coupling, &signs, &y0, grid, &cfg.ode_options(true))?;
    let mut worst = 0.0_f64;
    for (i, w) in waves.iter().enumerate() {
        let got = joint[n_nodes - 1][i];
        let want = match w.direction {
            Direction::Backward => w.boundary_power,
            Direction::Forward => profiles.waves()[i].power_vs_z[n_nodes - 1],
        };
        worst = worst.max((got - want).abs() / want.abs().max(1e-300));
    }
    Ok(worst)
}

/// Per-channel on/off gain in dB: 10·log10(P_on(L)/P_off(L)).
pub fn on_off_gain(
    with_pumps: &PowerProfileSet,
    without_pumps: &PowerProfileSet,
) -> Result<Vec<f64>, SolveError> {
    if with_pumps.n_signals != without_pumps.n_signals {
        return Err(SolveError::ProfileMismatch("different channel counts"));
    }
    if with_pumps.z_grid.len() != without_pumps.z_grid.len()
        || (with_pumps.span_length_km() - without_pumps.span_length_km()).abs()
            > 1e-9 * with_pumps.span_length_km()
    {
        return Err(SolveError::ProfileMismatch("different z grids"));
    }
    for (a, b) in with_pumps.signals().iter().zip(without_pumps.signals()) {
        if (a.frequency - b.frequency).abs() > 1e-6 {
            return Err(SolveError::ProfileMismatch("different channel frequencies"));
        }
    }
    Ok((0..with_pumps.n_signals)
        .map(|i| {
            10.0 * fmath::log10(with_pumps.signal_output(i) / without_pumps.signal_output(i))
        })
        .collect())
}

/// Thermal phonon occupancy at frequency separation Δf and temperature T.
fn phonon_occupancy(df_hz: f64, temperature_k: f64) -> f64 {
    if temperature_k <= 0.0 || df_hz <= 0.0 {
        return 0.0;
    }
    let x = PLANCK * df_hz / (BOLTZMANN * temperature_k);
    1.0 / fmath::exp_m1(x)
}

/// Distributed (spontaneous-Raman) ASE per channel after one span, W in the
/// channel bandwidth, both polarizations.
///
/// Integrates dP_A/dz = −α P_A + Σ_p g_r(Δf) P_p(z) (P_A + 2 h f_i B_i (1+n_th))
/// over the pumps with f_p > f_i, from P_A(0) = 0.
pub fn distributed_ase(
    fibre: &FibreSpec,
    profiles: &PowerProfileSet,
    plan: &ChannelPlan,
    cfg: &RamanSolverConfig,
) -> Result<Vec<f64>, SolveError> {
    cfg.validate()?;
    if profiles.n_signals != plan.len() {
        return Err(SolveError::ProfileMismatch(
            "profiles do not cover the channel plan",
        ));
    }
    for (w, c) in profiles.signals().iter().zip(plan.channels()) {
        if (w.frequency - c.center_frequency).abs() > 1e-6 {
            return Err(SolveError::ProfileMismatch("different channel frequencies"));
        }
    }

    let grid = profiles.z_grid();
    let n_nodes = grid.len();
    let pumps = profiles.pumps();
    let mut out = Vec::with_capacity(plan.len());

    for ch in plan.channels() {
        let f_i = ch.center_frequency;
        let alpha = fibre
            .attenuation_per_km(f_i)
            .map_err(|_| SolveError::FrequencyOutsideTables { f_hz: f_i })?;

        // Node-wise stimulated gain and spontaneous source from the pumps
        // above this channel.
        let mut gain = vec![0.0; n_nodes];
        let mut source = vec![0.0; n_nodes];
        for p in pumps {
            let df = p.frequency - f_i;
            if df <= 0.0 {
                continue;
            }
            let g = fibre.raman_gain_at_separation(df);
            if g == 0.0 {
                continue;
            }
            let seed = 2.0
                * PLANCK
                * f_i
                * ch.symbol_rate
                * (1.0 + phonon_occupancy(df, cfg.temperature_k));
            for k in 0..n_nodes {
                gain[k] += g * p.power_vs_z[k];
                source[k] += g * p.power_vs_z[k] * seed;
            }
        }

        if gain.iter().all(|&g| g == 0.0) {
            out.push(0.0);
            continue;
        }

        let h = grid[1] - grid[0];
        let n_cells = n_nodes - 1;
        let opts = OdeOptions {
            rtol: cfg.rtol.max(1e-10),
            atol: 1e-24,
            enforce_positive: false,
            ..OdeOptions::default()
        };
        let rhs = |z: f64, y: &[f64], dy: &mut [f64]| {
            let cell = ((z / h) as usize).min(n_cells - 1);
            let w = ((z - grid[cell]) / h).clamp(0.0, 1.0);
            let g = (1.0 - w) * gain[cell] + w * gain[cell + 1];
            let s = (1.0 - w) * source[cell] + w * source[cell + 1];
            dy[0] = (g - alpha) * y[0] + s;
        };
        let sol = integrate_on_grid(rhs, &[0.0], grid, &opts).map_err(SolveError::Integrator)?;
        out.push(sol[n_nodes - 1][0]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{AxisUnit, Extrapolation, Modulation, SpectralTable};

    fn test_fibre(alpha_db_km: f64, length_km: f64) -> FibreSpec {
        FibreSpec {
            length_km,
            attenuation: SpectralTable::flat(AxisUnit::Nm, 1300.0, 1700.0, alpha_db_km).unwrap(),
            raman_gain: SpectralTable::from_pairs(
                AxisUnit::Thz,
                &[(0.0, 0.0), (6.0, 0.25), (13.2, 0.42), (15.5, 0.2), (26.0, 0.0)],
                Extrapolation::Clamp,
            )
            .unwrap(),
            gamma_per_w_km: 1.4,
            effective_area_um2: 83.0,
            dispersion_ps_nm_km: 16.5,
            dispersion_slope_ps_nm2_km: 0.09,
            reference_wavelength_nm: 1550.0,
        }
    }

    fn backward_pumps(entries: &[(f64, f64)]) -> PumpSet {
        PumpSet::new(
            entries
                .iter()
                .map(|&(wavelength_nm, power_w)| Pump {
                    wavelength_nm,
                    power_w,
                    direction: Direction::Backward,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pure_attenuation_without_pumps() {
        let fibre = test_fibre(0.2, 71.0);
        let plan =
            ChannelPlan::uniform_grid(193.4e12, 32.5e9, 1, 32e9, 1e-3, Modulation::Gaussian)
                .unwrap();
        let profiles = solve_power_evolution(
            &fibre,
            &plan,
            &backward_pumps(&[(1425.0, 0.0)]),
            &RamanSolverConfig::default(),
        )
        .unwrap();
        // 0.2 dB/km over 71 km: output is launch − 14.2 dB.
        let loss_db = 10.0 * fmath::log10(profiles.signal_launch(0) / profiles.signal_output(0));
        assert!((loss_db - 14.2).abs() < 1e-7, "loss {loss_db} dB");
        // Zero-power pumps are dropped.
        assert!(profiles.pumps().is_empty());
    }

    #[test]
    fn photon_number_conserved_without_attenuation() {
        // Two coupled signals, negligible attenuation: Σ P_i/f_i constant.
        let fibre = test_fibre(1e-12, 40.0);
        let plan = ChannelPlan::uniform_grid(
            190e12,
            13.2e12,
            2,
            32e9,
            100e-3,
            Modulation::Gaussian,
        )
        .unwrap();
        let profiles =
            solve_power_evolution(&fibre, &plan, &PumpSet::none(), &RamanSolverConfig::default())
                .unwrap();
        let photon = |k: usize| {
            profiles
                .signals()
                .iter()
                .map(|w| w.power_vs_z[k] / w.frequency)
                .sum::<f64>()
        };
        let start = photon(0);
        // Power actually moved between the channels.
        let transfer = (profiles.signal(0).power_vs_z.last().unwrap()
            / profiles.signal(0).power_vs_z[0])
            .ln()
            .abs();
        assert!(transfer > 0.1, "expected visible ISRS transfer, got {transfer}");
        for k in 0..profiles.z_grid().len() {
            let drift = (photon(k) - start).abs() / start;
            assert!(drift < 1e-6, "photon drift {drift} at node {k}");
        }
    }

    #[test]
    fn isrs_disabled_gives_exact_exponential_decay() {
        let fibre = test_fibre(0.21, 50.0);
        let plan =
            ChannelPlan::uniform_grid(190e12, 5e12, 3, 32e9, 50e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig {
            include_isrs: false,
            ..Default::default()
        };
        let profiles = solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        for w in profiles.signals() {
            let alpha = fibre.attenuation_per_km(w.frequency).unwrap();
            for (k, &z) in profiles.z_grid().iter().enumerate() {
                let want = w.power_vs_z[0] * (-alpha * z).exp();
                assert!(
                    (w.power_vs_z[k] - want).abs() <= 1e-9 * want,
                    "z={z} got={} want={want}",
                    w.power_vs_z[k]
                );
            }
        }
    }

    #[test]
    fn backward_pump_amplifies_signal() {
        let fibre = test_fibre(0.2, 71.0);
        // Channel at 1505 nm, pump at 1405 nm: separation ~14 THz.
        let f_sig = wavelength_nm_to_frequency(1505.0);
        let plan =
            ChannelPlan::uniform_grid(f_sig, 32.5e9, 1, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let on = solve_power_evolution(&fibre, &plan, &backward_pumps(&[(1405.0, 0.4)]), &cfg)
            .unwrap();
        let off =
            solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        let gain = on_off_gain(&on, &off).unwrap();
        assert!(gain[0] > 3.0, "expected sizeable on/off gain, got {} dB", gain[0]);
        // Pump profile is stored in the signal frame: boundary applies at L.
        let pump = &on.pumps()[0];
        assert!(pump.power_vs_z.last().unwrap() > &0.399);
        assert!(pump.power_vs_z[0] < 0.2);
    }

    #[test]
    fn on_off_gain_identity_and_mismatch() {
        let fibre = test_fibre(0.2, 30.0);
        let plan =
            ChannelPlan::uniform_grid(190e12, 32.5e9, 3, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let p = solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        let g = on_off_gain(&p, &p).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-12));

        let other_plan =
            ChannelPlan::uniform_grid(191e12, 32.5e9, 3, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let q = solve_power_evolution(&fibre, &other_plan, &PumpSet::none(), &cfg).unwrap();
        assert!(on_off_gain(&p, &q).is_err());
    }

    #[test]
    fn far_detuned_pump_gives_zero_gain() {
        // Pump separation beyond the Raman table range: clamped to zero.
        let fibre = test_fibre(0.2, 40.0);
        let f_sig = wavelength_nm_to_frequency(1600.0);
        let plan =
            ChannelPlan::uniform_grid(f_sig, 32.5e9, 1, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let on = solve_power_evolution(&fibre, &plan, &backward_pumps(&[(1365.0, 0.5)]), &cfg)
            .unwrap();
        let off = solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        let gain = on_off_gain(&on, &off).unwrap();
        assert!(gain[0].abs() < 1e-9, "gain {}", gain[0]);
    }

    #[test]
    fn bvp_self_consistency_and_pump_depletion() {
        let fibre = test_fibre(0.2, 71.0);
        let f0 = wavelength_nm_to_frequency(1520.0);
        let plan =
            ChannelPlan::uniform_grid(f0, 100e9, 8, 32e9, 20e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let pumps = backward_pumps(&[(1405.0, 0.3), (1425.0, 0.3)]);
        let solved = solve_power_evolution(&fibre, &plan, &pumps, &cfg).unwrap();

        // Depletion: with strong signals the pump reaching z = 0 is weaker
        // than with negligible signals.
        let weak_plan =
            ChannelPlan::uniform_grid(f0, 100e9, 8, 32e9, 1e-9, Modulation::Gaussian).unwrap();
        let weak = solve_power_evolution(&fibre, &weak_plan, &pumps, &cfg).unwrap();
        let strong_pump_at_0 = solved.pumps()[0].power_vs_z[0];
        let weak_pump_at_0 = weak.pumps()[0].power_vs_z[0];
        assert!(
            strong_pump_at_0 < weak_pump_at_0 * 0.999,
            "no depletion visible: {strong_pump_at_0} vs {weak_pump_at_0}"
        );
    }

    #[test]
    fn direction_reciprocity() {
        // Two coupled pumps plus a negligible signal; flipping every pump
        // direction mirrors the profiles about the span centre.
        let fibre = test_fibre(0.25, 50.0);
        let plan = ChannelPlan::uniform_grid(
            wavelength_nm_to_frequency(1500.0),
            32.5e9,
            1,
            32e9,
            1e-30,
            Modulation::Gaussian,
        )
        .unwrap();
        let cfg = RamanSolverConfig {
            rtol: 1e-11,
            ..Default::default()
        };
        let backward = solve_power_evolution(
            &fibre,
            &plan,
            &backward_pumps(&[(1365.0, 0.4), (1425.0, 0.25)]),
            &cfg,
        )
        .unwrap();
        let forward = solve_power_evolution(
            &fibre,
            &plan,
            &PumpSet::new(vec![
                Pump {
                    wavelength_nm: 1365.0,
                    power_w: 0.4,
                    direction: Direction::Forward,
                },
                Pump {
                    wavelength_nm: 1425.0,
                    power_w: 0.25,
                    direction: Direction::Forward,
                },
            ])
            .unwrap(),
            &cfg,
        )
        .unwrap();
        let n = backward.z_grid().len();
        for p in 0..2 {
            let b = &backward.pumps()[p].power_vs_z;
            let f = &forward.pumps()[p].power_vs_z;
            for k in 0..n {
                let want = f[n - 1 - k];
                assert!(
                    (b[k] - want).abs() <= 1e-9 * want,
                    "pump {p} node {k}: {} vs {}",
                    b[k],
                    want
                );
            }
        }
    }

    #[test]
    fn distributed_ase_tracks_on_off_gain_shape() {
        // Across a band of channels, the spontaneous-Raman ASE spectrum (dB)
        // follows the on/off gain spectrum (dB): correlation above 0.9.
        let fibre = test_fibre(0.2, 71.0);
        let f0 = wavelength_nm_to_frequency(1525.0);
        let plan =
            ChannelPlan::uniform_grid(f0, 150e9, 24, 32e9, 0.4e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let pumps = backward_pumps(&[(1405.0, 0.32), (1425.0, 0.3)]);
        let on = solve_power_evolution(&fibre, &plan, &pumps, &cfg).unwrap();
        let off = solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        let gain_db = on_off_gain(&on, &off).unwrap();
        let ase_db: Vec<f64> = distributed_ase(&fibre, &on, &plan, &cfg)
            .unwrap()
            .iter()
            .map(|&a| 10.0 * fmath::log10(a))
            .collect();

        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mg, ma) = (mean(&gain_db), mean(&ase_db));
        let mut num = 0.0;
        let mut dg = 0.0;
        let mut da = 0.0;
        for (g, a) in gain_db.iter().zip(&ase_db) {
            num += (g - mg) * (a - ma);
            dg += (g - mg) * (g - mg);
            da += (a - ma) * (a - ma);
        }
        let corr = num / (dg * da).sqrt();
        assert!(corr > 0.9, "ASE/gain correlation {corr:.3}");
    }

    #[test]
    fn pump_depletion_switch() {
        // With depletion off, strong signals no longer weaken the pump: its
        // z = 0 power matches the weak-signal solve.
        let fibre = test_fibre(0.2, 71.0);
        let f0 = wavelength_nm_to_frequency(1510.0);
        let pumps = backward_pumps(&[(1425.0, 0.3)]);
        let strong =
            ChannelPlan::uniform_grid(f0, 100e9, 8, 32e9, 20e-3, Modulation::Gaussian).unwrap();
        let weak =
            ChannelPlan::uniform_grid(f0, 100e9, 8, 32e9, 1e-9, Modulation::Gaussian).unwrap();
        let no_depletion = RamanSolverConfig {
            include_pump_depletion: false,
            ..Default::default()
        };
        let a = solve_power_evolution(&fibre, &strong, &pumps, &no_depletion).unwrap();
        let b =
            solve_power_evolution(&fibre, &weak, &pumps, &RamanSolverConfig::default()).unwrap();
        let pa = a.pumps()[0].power_vs_z[0];
        let pb = b.pumps()[0].power_vs_z[0];
        assert!(
            (pa - pb).abs() < 2e-3 * pb,
            "undepleted pump {pa} vs weak-signal pump {pb}"
        );
    }

    #[test]
    fn distributed_ase_zero_without_pumps() {
        let fibre = test_fibre(0.2, 71.0);
        let plan =
            ChannelPlan::uniform_grid(190e12, 32.5e9, 4, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let profiles = solve_power_evolution(&fibre, &plan, &PumpSet::none(), &cfg).unwrap();
        let ase = distributed_ase(&fibre, &profiles, &plan, &cfg).unwrap();
        assert!(ase.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn distributed_ase_decreases_with_temperature() {
        let fibre = test_fibre(0.2, 71.0);
        let f_sig = wavelength_nm_to_frequency(1505.0);
        let plan =
            ChannelPlan::uniform_grid(f_sig, 32.5e9, 1, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let cfg = RamanSolverConfig::default();
        let profiles =
            solve_power_evolution(&fibre, &plan, &backward_pumps(&[(1405.0, 0.4)]), &cfg).unwrap();

        let mut last = f64::INFINITY;
        for t in [298.0, 200.0, 100.0, 0.0] {
            let cfg_t = RamanSolverConfig {
                temperature_k: t,
                ..cfg
            };
            let ase = distributed_ase(&fibre, &profiles, &plan, &cfg_t).unwrap()[0];
            assert!(ase > 0.0);
            assert!(ase < last, "ASE not decreasing with T: {ase} at {t} K");
            last = ase;
        }
    }

    #[test]
    fn grid_refinement_changes_outputs_below_hundredth_db() {
        let fibre = test_fibre(0.2, 71.0);
        let f0 = wavelength_nm_to_frequency(1515.0);
        let plan =
            ChannelPlan::uniform_grid(f0, 200e9, 4, 32e9, 10e-3, Modulation::Gaussian).unwrap();
        let pumps = backward_pumps(&[(1405.0, 0.3), (1425.0, 0.3)]);
        let coarse = solve_power_evolution(&fibre, &plan, &pumps, &RamanSolverConfig::default())
            .unwrap();
        let fine_cfg = RamanSolverConfig {
            z_step_max_km: 0.05,
            ..Default::default()
        };
        let fine = solve_power_evolution(&fibre, &plan, &pumps, &fine_cfg).unwrap();
        for i in 0..plan.len() {
            let d_db =
                10.0 * fmath::log10(coarse.signal_output(i) / fine.signal_output(i)).abs();
            assert!(d_db < 0.01, "channel {i}: {d_db} dB");
        }
    }

    #[test]
    fn rejects_frequency_outside_attenuation_table() {
        let mut fibre = test_fibre(0.2, 71.0);
        fibre.attenuation =
            SpectralTable::from_pairs(AxisUnit::Nm, &[(1500.0, 0.2), (1600.0, 0.2)], Extrapolation::Error)
                .unwrap();
        let plan =
            ChannelPlan::uniform_grid(190e12, 32.5e9, 1, 32e9, 1e-3, Modulation::Gaussian).unwrap();
        let res = solve_power_evolution(
            &fibre,
            &plan,
            &backward_pumps(&[(1405.0, 0.3)]),
            &RamanSolverConfig::default(),
        );
        assert!(matches!(res, Err(SolveError::FrequencyOutsideTables { .. })));
    }

    #[test]
    fn pump_set_validation() {
        assert!(PumpSet::new(vec![Pump {
            wavelength_nm: 1405.0,
            power_w: -0.1,
            direction: Direction::Backward,
        }])
        .is_err());
        assert!(PumpSet::new(vec![
            Pump {
                wavelength_nm: 1405.0,
                power_w: 0.1,
                direction: Direction::Backward,
            },
            Pump {
                wavelength_nm: 1405.0,
                power_w: 0.2,
                direction: Direction::Backward,
            },
        ])
        .is_err());
        let set = backward_pumps(&[(1365.0, 0.5058), (1385.0, 0.3741)]);
        assert!((set.total_power_w() - 0.8799).abs() < 1e-12);
    }
}
