//! Spectral angular derivatives on the (θ, φ) product grid.
//!
//! φ-derivatives are plain Fourier derivatives. θ-derivatives run along great circles through
//! the poles: the column at φ and the one at φ + π are joined into a periodic line of length
//! `2 N_θ`, on which any smooth function of the direction is smooth and periodic.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Periodic Fourier differentiation of length-`m` real lines (`m` even, Nyquist mode dropped).
#[derive(Clone)]
struct LineDiff {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LineDiff {
    fn new(m: usize, planner: &mut FftPlanner<f64>) -> Self {
        LineDiff {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    /// Differentiates two real lines at once, packed as real and imaginary parts; `period` is the
    /// length of the periodic interval.
    fn apply_pair(&self, buf: &mut [Complex64], period: f64) {
        let m = self.m;
        self.forward.process(buf);
        // Unpack the two real transforms, multiply each by i·k, repack.
        let scale = 2.0 * std::f64::consts::PI / period / m as f64;
        let mut packed = vec![Complex64::new(0.0, 0.0); m];
        for q in 0..m {
            let qm = (m - q) % m;
            let a = 0.5 * (buf[q] + buf[qm].conj());
            let b = Complex64::new(0.0, -0.5) * (buf[q] - buf[qm].conj());
            let k = if q < m / 2 {
                q as f64
            } else if q == m / 2 {
                0.0
            } else {
                q as f64 - m as f64
            };
            let ik = Complex64::new(0.0, k * scale);
            packed[q] = ik * a + Complex64::new(0.0, 1.0) * ik * b;
        }
        buf.copy_from_slice(&packed);
        self.inverse.process(buf);
    }
}

/// Differentiation operators for fields sampled at `index = j_θ · N_φ + k_φ`.
#[derive(Clone)]
pub struct SphereDifferentiator {
    pub n_theta: usize,
    pub n_phi: usize,
    phi: LineDiff,
    theta: LineDiff,
}

impl std::fmt::Debug for SphereDifferentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereDifferentiator")
            .field("n_theta", &self.n_theta)
            .field("n_phi", &self.n_phi)
            .finish()
    }
}

impl SphereDifferentiator {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        assert!(n_phi >= 2 && n_phi.is_multiple_of(2), "N_φ must be even");
        assert!(n_theta >= 1);
        let mut planner = FftPlanner::new();
        SphereDifferentiator {
            n_theta,
            n_phi,
            phi: LineDiff::new(n_phi, &mut planner),
            theta: LineDiff::new(2 * n_theta, &mut planner),
        }
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_phi(&self, u: &[f64], out: &mut [f64]) {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        let mut j = 0;
        while j < nt {
            let j2 = (j + 1).min(nt - 1);
            for k in 0..np {
                let im = if j2 != j { u[j2 * np + k] } else { 0.0 };
                buf[k] = Complex64::new(u[j * np + k], im);
            }
            self.phi.apply_pair(&mut buf, 2.0 * std::f64::consts::PI);
            for k in 0..np {
                out[j * np + k] = buf[k].re;
                if j2 != j {
                    out[j2 * np + k] = buf[k].im;
                }
            }
            j += 2;
        }
    }

    pub fn d_theta(&self, u: &[f64], out: &mut [f64]) {
        let (nt, np) = (self.n_theta, self.n_phi);
        let half = np / 2;
        let m = 2 * nt;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut k = 0;
        while k < half {
            let k2 = (k + 1).min(half - 1);
            let pair = k2 != k;
            let line = |kk: usize, idx: usize| -> f64 {
                if idx < nt {
                    u[idx * np + kk]
                } else {
                    u[(m - 1 - idx) * np + kk + half]
                }
            };
            for idx in 0..m {
                let im = if pair { line(k2, idx) } else { 0.0 };
                buf[idx] = Complex64::new(line(k, idx), im);
            }
            self.theta.apply_pair(&mut buf, 2.0 * std::f64::consts::PI);
            for idx in 0..m {
                let (re, im) = (buf[idx].re, buf[idx].im);
                if idx < nt {
                    out[idx * np + k] = re;
                    if pair {
                        out[idx * np + k2] = im;
                    }
                } else {
                    let j = m - 1 - idx;
                    out[j * np + k + half] = -re;
                    if pair {
                        out[j * np + k2 + half] = -im;
                    }
                }
            }
            k += 2;
        }
    }

    /// `(∂_θ u, ∂_φ u)`.
    pub fn gradient(&self, u: &[f64]) -> [Vec<f64>; 2] {
        let mut dt = vec![0.0; u.len()];
        let mut dp = vec![0.0; u.len()];
        self.d_theta(u, &mut dt);
        self.d_phi(u, &mut dp);
        [dt, dp]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::fejer_first;

    fn grid(nt: usize, np: usize) -> Vec<(f64, f64)> {
        let (theta, _) = fejer_first(nt);
        let mut pts = Vec::new();
        for t in &theta {
            for k in 0..np {
                pts.push((*t, 2.0 * std::f64::consts::PI * k as f64 / np as f64));
            }
        }
        pts
    }

    fn smooth(t: f64, p: f64) -> [f64; 3] {
        let (x, y, z) = (t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
        let f = (0.7 * x - 0.4 * y + 0.9 * z).exp() + x * y * z;
        // ∇f in Cartesian components, then projected on ∂θ, ∂φ.
        let e = (0.7 * x - 0.4 * y + 0.9 * z).exp();
        let g = [0.7 * e + y * z, -0.4 * e + x * z, 0.9 * e + x * y];
        let dth = [t.cos() * p.cos(), t.cos() * p.sin(), -t.sin()];
        let dph = [-t.sin() * p.sin(), t.sin() * p.cos(), 0.0];
        let ft = g[0] * dth[0] + g[1] * dth[1] + g[2] * dth[2];
        let fp = g[0] * dph[0] + g[1] * dph[1] + g[2] * dph[2];
        [f, ft, fp]
    }

    #[test]
    fn derivatives_of_smooth_sphere_function_converge_spectrally() {
        let mut errs = Vec::new();
        for (nt, np) in [(8, 16), (16, 32)] {
            let pts = grid(nt, np);
            let u: Vec<f64> = pts.iter().map(|&(t, p)| smooth(t, p)[0]).collect();
            let d = SphereDifferentiator::new(nt, np);
            let [dt, dp] = d.gradient(&u);
            let mut worst: f64 = 0.0;
            for (i, &(t, p)) in pts.iter().enumerate() {
                let s = smooth(t, p);
                worst = worst.max((dt[i] - s[1]).abs()).max((dp[i] - s[2]).abs());
            }
            errs.push(worst);
        }
        assert!(errs[0] < 1e-3, "{errs:?}");
        assert!(errs[1] < 1e-11, "{errs:?}");
    }

    #[test]
    fn odd_theta_count_and_single_pair_paths() {
        let (nt, np) = (5, 6);
        let pts = grid(nt, np);
        let u: Vec<f64> = pts
            .iter()
            .map(|&(t, p)| t.cos() + t.sin() * p.sin())
            .collect();
        let d = SphereDifferentiator::new(nt, np);
        let [dt, dp] = d.gradient(&u);
        for (i, &(t, p)) in pts.iter().enumerate() {
            assert!((dt[i] - (-t.sin() + t.cos() * p.sin())).abs() < 1e-12);
            assert!((dp[i] - t.sin() * p.cos()).abs() < 1e-12);
        }
    }
}
