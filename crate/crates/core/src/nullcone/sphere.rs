use std::f64::consts::PI;

use crate::numerics::quadrature::fejer_first;
use crate::numerics::spectral::SphereDifferentiator;

/// Product grid of directions: Fejér angles in θ (no poles) times uniform φ.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Chart weights for `∫ F dθ dφ` at each node (`index = j_θ · N_φ + k_φ`).
    pub chart_weights: Vec<f64>,
    pub diff: SphereDifferentiator,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (theta, w) = fejer_first(n_theta);
        let phi: Vec<f64> = (0..n_phi)
            .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut chart_weights = Vec::with_capacity(n_theta * n_phi);
        for (t, wt) in theta.iter().zip(&w) {
            for _ in 0..n_phi {
                chart_weights.push(wt / t.sin() * dphi);
            }
        }
        SphereGrid {
            n_theta,
            n_phi,
            theta,
            phi,
            chart_weights,
            diff: SphereDifferentiator::new(n_theta, n_phi),
        }
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angles(&self, j: usize) -> (f64, f64) {
        (self.theta[j / self.n_phi], self.phi[j % self.n_phi])
    }

    /// Unit direction ω and its chart derivatives `∂_θ ω`, `∂_φ ω`.
    pub fn direction(&self, j: usize) -> [[f64; 3]; 3] {
        let (t, p) = self.angles(j);
        let (st, ct) = t.sin_cos();
        let (sp, cp) = p.sin_cos();
        [
            [st * cp, st * sp, ct],
            [ct * cp, ct * sp, -st],
            [-st * sp, st * cp, 0.0],
        ]
    }

    /// `∫_{S²} F dω` for samples on the unit sphere.
    pub fn unit_sphere_integral(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.chart_weights)
            .enumerate()
            .map(|(j, (v, w))| v * w * self.angles(j).0.sin())
            .collect();
        crate::numerics::quadrature::pairwise_sum(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_area_and_harmonics() {
        let s = SphereGrid::new(8, 16);
        let ones = vec![1.0; s.len()];
        assert!((s.unit_sphere_integral(&ones) - 4.0 * PI).abs() < 1e-13);
        let z2: Vec<f64> = (0..s.len()).map(|j| s.direction(j)[0][2].powi(2)).collect();
        assert!((s.unit_sphere_integral(&z2) - 4.0 * PI / 3.0).abs() < 1e-13);
        let odd: Vec<f64> = (0..s.len())
            .map(|j| s.direction(j)[0][0] * s.direction(j)[0][1] * s.direction(j)[0][2])
            .collect();
        assert!(s.unit_sphere_integral(&odd).abs() < 1e-14);
    }
}
