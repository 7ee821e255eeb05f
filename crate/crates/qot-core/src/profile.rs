//! Normalized signal-power profiles and their multi-exponential
//! least-squares representation, ρ(z) ≈ Σ_k c_k e^{−2 a_k z} with Σ c_k = 1.
//!
//! The fitted form feeds the closed-form NLI model; the ODE solver remains
//! the source of truth for the profiles themselves.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::raman::{PowerProfileSet, WaveKind};

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    NotASignal { index: usize },
    TooManyTerms { terms: usize, samples: usize },
    BadTermCount { terms: usize },
    NonPositiveSample { index: usize, value: f64 },
    NotNormalized { first: f64 },
    NonPositiveFit { z_km: f64 },
    Singular,
    GridMismatch,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::NotASignal { index } => write!(f, "wave {index} is not a signal"),
            FitError::TooManyTerms { terms, samples } => {
                write!(f, "{terms} exponential terms need more than {samples} samples")
            }
            FitError::BadTermCount { terms } => {
                write!(f, "term count must be between 1 and 8, got {terms}")
            }
            FitError::NonPositiveSample { index, value } => {
                write!(f, "profile sample {index} not positive ({value})")
            }
            FitError::NotNormalized { first } => {
                write!(f, "profile must start at 1 (got {first})")
            }
            FitError::NonPositiveFit { z_km } => {
                write!(f, "fitted profile non-positive at z = {z_km} km")
            }
            FitError::Singular => write!(f, "singular normal equations in fit"),
            FitError::GridMismatch => write!(f, "z grid and samples differ in length"),
        }
    }
}

impl core::error::Error for FitError {}

/// One exponential term of a fitted profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTerm {
    /// Dimensionless amplitude c_k (may be negative for gain-bump profiles).
    pub amplitude: f64,
    /// Rate a_k in 1/km; the profile term is c_k e^{−2 a_k z}.
    pub rate_per_km: f64,
}

/// Multi-exponential representation of one channel's normalized profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    terms: Vec<FitTerm>,
    /// max |10·log10(ρ_fit/ρ)| over the fitted grid, dB.
    residual_db: f64,
}

impl ExponentialFit {
    pub fn terms(&self) -> &[FitTerm] {
        &self.terms
    }

    pub fn residual_db(&self) -> f64 {
        self.residual_db
    }

    /// ρ_fit(z).
    pub fn eval(&self, z_km: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * fmath::exp(-2.0 * t.rate_per_km * z_km))
            .sum()
    }
}

/// ρ(z) = P(z)/P(0) for one signal channel of a solved profile set.
pub fn normalize_profile(profiles: &PowerProfileSet, channel: usize) -> Result<Vec<f64>, FitError> {
    let wave = profiles
        .waves()
        .get(channel)
        .ok_or(FitError::NotASignal { index: channel })?;
    if wave.kind != WaveKind::Signal {
        return Err(FitError::NotASignal { index: channel });
    }
    let p0 = wave.power_vs_z[0];
    Ok(wave.power_vs_z.iter().map(|&p| p / p0).collect())
}

/// Solve a dense linear system in place by Gaussian elimination with partial
/// pivoting. `a` is row-major n×n, `b` the right-hand side.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), FitError> {
    for col in 0..n {
        let mut pivot = col;
        let mut best = fmath::abs(a[col * n + col]);
        for row in col + 1..n {
            let v = fmath::abs(a[row * n + col]);
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-300 {
            return Err(FitError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

/// Working representation during fitting: rates plus free amplitudes with
/// c_K eliminated by the sum-to-one constraint.
#[derive(Clone)]
struct FitState {
    rates: Vec<f64>,
    amps: Vec<f64>, // full K amplitudes; amps[K-1] = 1 − Σ others
}

impl FitState {
    fn k(&self) -> usize {
        self.rates.len()
    }

    fn enforce_constraint(&mut self) {
        let k = self.k();
        let head: f64 = self.amps[..k - 1].iter().sum();
        self.amps[k - 1] = 1.0 - head;
    }

    fn eval(&self, z: f64) -> f64 {
        self.rates
            .iter()
            .zip(&self.amps)
            .map(|(&a, &c)| c * fmath::exp(-2.0 * a * z))
            .sum()
    }
}

/// Log-domain sum of squared residuals; None if the fit goes non-positive.
fn log_sse(state: &FitState, z: &[f64], log_rho: &[f64]) -> Option<f64> {
    let mut sse = 0.0;
    for (m, &zm) in z.iter().enumerate() {
        let v = state.eval(zm);
        if v <= 0.0 {
            return None;
        }
        let r = fmath::ln(v) - log_rho[m];
        sse += r * r;
    }
    Some(sse)
}

/// Levenberg–Marquardt refinement of rates and free amplitudes on the
/// log-domain residuals. Deterministic; never increases the SSE.
fn refine(state: &mut FitState, z: &[f64], log_rho: &[f64]) {
    let k = state.k();
    let n_par = 2 * k - 1; // c_1..c_{K-1}, a_1..a_K
    let m = z.len();
    let mut lambda = 1e-3;
    let mut sse = match log_sse(state, z, log_rho) {
        Some(s) => s,
        None => return,
    };

    let mut jac = vec![0.0; m * n_par];
    let mut resid = vec![0.0; m];

    for _iter in 0..200 {
        // Residuals and Jacobian at the current point.
        for (row, &zm) in z.iter().enumerate() {
            let v = state.eval(zm);
            resid[row] = fmath::ln(v) - log_rho[row];
            let e_last = fmath::exp(-2.0 * state.rates[k - 1] * zm);
            for j in 0..k - 1 {
                let e_j = fmath::exp(-2.0 * state.rates[j] * zm);
                jac[row * n_par + j] = (e_j - e_last) / v;
            }
            for j in 0..k {
                let e_j = fmath::exp(-2.0 * state.rates[j] * zm);
                jac[row * n_par + (k - 1 + j)] = -2.0 * zm * state.amps[j] * e_j / v;
            }
        }

        // Normal equations.
        let mut jtj = vec![0.0; n_par * n_par];
        let mut jtr = vec![0.0; n_par];
        for row in 0..m {
            for p in 0..n_par {
                let jp = jac[row * n_par + p];
                jtr[p] += jp * resid[row];
                for q in p..n_par {
                    jtj[p * n_par + q] += jp * jac[row * n_par + q];
                }
            }
        }
        for p in 0..n_par {
            for q in 0..p {
                jtj[p * n_par + q] = jtj[q * n_par + p];
            }
        }

        let mut improved = false;
        for _try in 0..12 {
            let mut a = jtj.clone();
            for p in 0..n_par {
                a[p * n_par + p] += lambda * jtj[p * n_par + p].max(1e-12);
            }
            let mut delta: Vec<f64> = jtr.iter().map(|&v| -v).collect();
            if solve_dense(&mut a, &mut delta, n_par).is_err() {
                lambda *= 4.0;
                continue;
            }
            let mut trial = state.clone();
            for j in 0..k - 1 {
                trial.amps[j] += delta[j];
            }
            for j in 0..k {
                trial.rates[j] += delta[k - 1 + j];
            }
            trial.enforce_constraint();
            match log_sse(&trial, z, log_rho) {
                Some(new_sse) if new_sse <= sse => {
                    let gain = sse - new_sse;
                    *state = trial;
                    sse = new_sse;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if gain <= 1e-16 * sse.max(1e-30) {
                        return;
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            return;
        }
    }
}

/// Constrained linear least squares for the amplitudes at fixed rates,
/// weighted by 1/ρ² (the linear-domain equivalent of log weighting).
fn amplitudes_at_fixed_rates(
    rates: &[f64],
    z: &[f64],
    rho: &[f64],
) -> Result<Vec<f64>, FitError> {
    let k = rates.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let n = k - 1;
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    for (m, &zm) in z.iter().enumerate() {
        let w = 1.0 / (rho[m] * rho[m]);
        let e_last = fmath::exp(-2.0 * rates[k - 1] * zm);
        let t = rho[m] - e_last;
        for p in 0..n {
            let xp = fmath::exp(-2.0 * rates[p] * zm) - e_last;
            atb[p] += w * xp * t;
            for q in p..n {
                let xq = fmath::exp(-2.0 * rates[q] * zm) - e_last;
                ata[p * n + q] += w * xp * xq;
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            ata[p * n + q] = ata[q * n + p];
        }
    }
    let mut amps = atb;
    solve_dense(&mut ata, &mut amps, n)?;
    let head: f64 = amps.iter().sum();
    amps.push(1.0 - head);
    Ok(amps)
}

/// Max |10·log10(ρ_fit/ρ)| over the grid, or None if the fit dips to zero.
fn residual_db(state: &FitState, z: &[f64], rho: &[f64]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for (m, &zm) in z.iter().enumerate() {
        let v = state.eval(zm);
        if v <= 0.0 {
            return None;
        }
        let d = fmath::abs(10.0 * fmath::log10(v / rho[m]));
        if d > worst {
            worst = d;
        }
    }
    Some(worst)
}

/// Average field-rate scale of the profile, used to seed the rate grid.
fn reference_rate(z: &[f64], rho: &[f64]) -> f64 {
    let last = *rho.last().unwrap();
    let len = *z.last().unwrap();
    let from_ends = -fmath::ln(last) / (2.0 * len);
    if from_ends.is_finite() && from_ends > 1e-6 {
        return from_ends;
    }
    // Net-gain or flat profile: use the steepest observed average decay,
    // falling back to a 0.2 dB/km field rate.
    let steepest = z
        .iter()
        .zip(rho)
        .skip(1)
        .map(|(&zm, &r)| -fmath::ln(r) / (2.0 * zm))
        .fold(f64::NEG_INFINITY, f64::max);
    if steepest.is_finite() && steepest > 1e-6 {
        steepest
    } else {
        0.2 * core::f64::consts::LN_10 / 20.0
    }
}

fn geometric_rates(a_ref: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![a_ref];
    }
    (0..k)
        .map(|i| a_ref * 0.25 * fmath::powf(16.0, i as f64 / (k as f64 - 1.0)))
        .collect()
}

/// Least-squares multi-exponential fit of a normalized profile.
///
/// `z_km` is the solver grid (strictly increasing, starting at 0); `rho` the
/// normalized samples with ρ(0) = 1. The fit is deterministic: rates are
/// seeded geometrically around the profile's average attenuation, amplitudes
/// come from a constrained linear solve, and a damped Gauss–Newton iteration
/// refines both jointly; term counts are grown nested so the residual is
/// monotone non-increasing in `terms`.
pub fn fit_exponentials(
    z_km: &[f64],
    rho: &[f64],
    terms: usize,
) -> Result<ExponentialFit, FitError> {
    if z_km.len() != rho.len() {
        return Err(FitError::GridMismatch);
    }
    if terms < 1 || terms > 8 {
        return Err(FitError::BadTermCount { terms });
    }
    if 2 * terms >= rho.len() {
        return Err(FitError::TooManyTerms {
            terms,
            samples: rho.len(),
        });
    }
    for (index, &v) in rho.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(FitError::NonPositiveSample { index, value: v });
        }
    }
    if fmath::abs(rho[0] - 1.0) > 1e-9 {
        return Err(FitError::NotNormalized { first: rho[0] });
    }

    let log_rho: Vec<f64> = rho.iter().map(|&r| fmath::ln(r)).collect();
    let a_ref = reference_rate(z_km, rho);

    // Candidate comparison: residual first, then SSE.
    let score = |state: &FitState| -> Option<(f64, f64)> {
        let r = residual_db(state, z_km, rho)?;
        let s = log_sse(state, z_km, &log_rho)?;
        Some((r, s))
    };

    // Grow the term count nested: at each k, the candidate set contains an
    // unrefined copy of the previous best with a zero-amplitude extra term
    // (same curve, so the residual can never regress), its refinement, and a
    // fresh geometric seeding at the end points.
    let mut current: Option<(FitState, (f64, f64))> = None;
    for k in 1..=terms {
        let mut candidates: Vec<FitState> = Vec::new();

        if let Some((prev, _)) = &current {
            let mut grown = prev.clone();
            let new_rate = grown
                .rates
                .iter()
                .fold(4.0 * a_ref, |acc, &r| acc.max(1.8 * r));
            grown.rates.push(new_rate);
            grown.amps.push(0.0);
            grown.enforce_constraint();
            candidates.push(grown.clone());
            let mut refined = grown;
            refine(&mut refined, z_km, &log_rho);
            candidates.push(refined);
        }

        if k == 1 || k == terms {
            let rates = geometric_rates(a_ref, k);
            if let Ok(amps) = amplitudes_at_fixed_rates(&rates, z_km, rho) {
                let mut st = FitState { rates, amps };
                st.enforce_constraint();
                refine(&mut st, z_km, &log_rho);
                candidates.push(st);
            }
        }

        let mut best_k: Option<(FitState, (f64, f64))> = None;
        for cand in candidates {
            if let Some(sc) = score(&cand) {
                if best_k.as_ref().map_or(true, |(_, b)| sc < *b) {
                    best_k = Some((cand, sc));
                }
            }
        }
        current = best_k.or(current);
    }

    let (state, (res_db, _)) = current.ok_or(FitError::Singular)?;
    if state.k() != terms {
        return Err(FitError::Singular);
    }
    // Positivity of the fitted curve over the grid is a hard requirement.
    for (m, &zm) in z_km.iter().enumerate() {
        if state.eval(zm) <= 0.0 {
            let _ = m;
            return Err(FitError::NonPositiveFit { z_km: zm });
        }
    }

    let mut terms_out: Vec<FitTerm> = state
        .rates
        .iter()
        .zip(&state.amps)
        .map(|(&rate_per_km, &amplitude)| FitTerm {
            amplitude,
            rate_per_km,
        })
        .collect();
    terms_out.sort_by(|a, b| a.rate_per_km.partial_cmp(&b.rate_per_km).unwrap());
    Ok(ExponentialFit {
        terms: terms_out,
        residual_db: res_db,
    })
}
