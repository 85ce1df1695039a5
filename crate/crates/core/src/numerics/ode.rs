//! Adaptive Dormand–Prince 5(4) integration that lands exactly on requested output times.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("right-hand side failed at t = {t}: {reason}")]
    RhsFailure { t: f64, reason: String },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeTolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerances {
    fn default() -> Self {
        OdeTolerances {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 200_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Right-hand side `dy/dt = f(t, y)`; errors abort the integration.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String>;
    /// Number of leading components that enter the error norm.
    fn controlled_dim(&self) -> usize {
        self.dim()
    }
}

/// Integrates from `(t0, y0)` and returns the state at each of the monotone `targets`.
///
/// Steps are clipped so every target is hit exactly rather than interpolated.
pub fn integrate_to<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    targets: &[f64],
    tol: &OdeTolerances,
    initial_step: f64,
) -> Result<Vec<Vec<f64>>, OdeError> {
    let n = sys.dim();
    let nc = sys.controlled_dim();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut out = Vec::with_capacity(targets.len());
    let mut h = initial_step.abs();
    let mut steps = 0usize;
    let fail = |t: f64| move |reason: String| OdeError::RhsFailure { t, reason };
    sys.rhs(t, &y, &mut k[0]).map_err(fail(t))?;
    for &target in targets {
        let dir = if target >= t { 1.0 } else { -1.0 };
        while (target - t).abs() > 1e-15 * target.abs().max(1.0) {
            steps += 1;
            if steps > tol.max_steps {
                return Err(OdeError::TooManySteps { t });
            }
            let remaining = (target - t).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            let hs = dir * step;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = y[i] + hs * acc;
                }
                sys.rhs(t + C[s] * hs, &stage, &mut k[s]).map_err(fail(t))?;
            }
            // The last stage is evaluated at the fifth-order solution (FSAL).
            y_new.copy_from_slice(&stage);
            let mut err = 0.0;
            for i in 0..nc {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= hs;
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / nc.max(1) as f64).sqrt();
            if !err.is_finite() {
                h = step * 0.2;
                if h < 1e-14 * t.abs().max(1e-300) {
                    return Err(OdeError::NonFinite { t });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || factor < 1.0 {
                    h = step * factor;
                } else {
                    h = h.max(step * factor);
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h <= 1e-14 * t.abs().max(remaining) {
                return Err(OdeError::StepUnderflow { t });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        out.push(y.clone());
    }
    Ok(out)
}
