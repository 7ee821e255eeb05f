//! Adaptive Dormand–Prince 5(4) integrator with an optional per-step
//! positivity guard, producing the solution on a caller-supplied grid.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;

// Dormand–Prince coefficients.
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th-order solution weights (also the a7j row, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-minus-4th error weights.
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 - -92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// The positivity guard or the error control drove the step size
    /// below the floor.
    StepSizeUnderflow { x: f64, h: f64 },
    /// Safety cap on total step count hit.
    StepBudgetExceeded { x: f64 },
    /// Grid not strictly increasing.
    BadGrid,
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::StepSizeUnderflow { x, h } => {
                write!(f, "step size underflow at x={x} (h={h})")
            }
            OdeError::StepBudgetExceeded { x } => write!(f, "step budget exceeded at x={x}"),
            OdeError::BadGrid => write!(f, "output grid must be strictly increasing"),
        }
    }
}

impl core::error::Error for OdeError {}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Reject any step producing a non-positive component.
    pub enforce_positive: bool,
    /// Minimum step size as a fraction of the integration interval.
    pub h_min_fraction: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-15,
            enforce_positive: false,
            h_min_fraction: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

/// Integrate dy/dx = rhs(x, y) from `grid[0]` to `grid.last()`, returning the
/// state at every grid point (the first entry is a copy of `y0`). Steps adapt
/// freely inside each grid cell but always land exactly on cell boundaries.
pub fn integrate_on_grid<F>(
    mut rhs: F,
    y0: &[f64],
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::BadGrid);
    }
    let n = y0.len();
    let total = grid[grid.len() - 1] - grid[0];
    let h_min = opts.h_min_fraction * total;

    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.to_vec());

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    let mut x = grid[0];
    let mut h = total / 100.0;
    let mut steps = 0usize;
    let mut k1_fresh = false;

    for cell in 1..grid.len() {
        let target = grid[cell];
        while x < target {
            if steps >= opts.max_steps {
                return Err(OdeError::StepBudgetExceeded { x });
            }
            steps += 1;
            // Clipping to the cell boundary may legitimately make the step
            // tiny; only rejection-driven shrinkage trips the underflow check.
            let hs = h.min(target - x);

            if !k1_fresh {
                rhs(x, &y, &mut k1);
                k1_fresh = true;
            }

            for i in 0..n {
                ytmp[i] = y[i] + hs * A21 * k1[i];
            }
            rhs(x + C[0] * hs, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(x + C[1] * hs, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(x + C[2] * hs, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(x + C[3] * hs, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(x + C[4] * hs, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(x + hs, &ynew, &mut k7);

            // Positivity guard first: a non-positive power is a hard reject.
            // k1 stays valid because (x, y) are unchanged.
            if opts.enforce_positive && ynew.iter().any(|&v| v <= 0.0) {
                h = 0.5 * hs;
                if h < h_min {
                    return Err(OdeError::StepSizeUnderflow { x, h });
                }
                continue;
            }

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let scale = opts.atol + opts.rtol * fmath::abs(y[i]).max(fmath::abs(ynew[i]));
                let r = fmath::abs(e) / scale;
                if r > err {
                    err = r;
                }
            }

            if err <= 1.0 {
                x += hs;
                core::mem::swap(&mut y, &mut ynew);
                core::mem::swap(&mut k1, &mut k7); // FSAL
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * fmath::powf(err, -0.2)).clamp(0.2, 5.0)
                };
                h = hs * factor;
            } else {
                let factor = (0.9 * fmath::powf(err, -0.2)).clamp(0.1, 1.0);
                h = hs * factor;
                if h < h_min {
                    return Err(OdeError::StepSizeUnderflow { x, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
