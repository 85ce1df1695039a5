use rayon::prelude::*;

use crate::horizontal::Slice;
use crate::nullcone::ConeGrid;
use crate::numerics::quadrature::{pairwise_sum, vertex_simpson, vertex_simpson_coarse};

use super::ParametrixError;

/// Relative roundoff allowance on the integral of `|φ|`.
const ROUNDOFF: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConeIntegral {
    pub value: f64,
    /// Estimated quadrature error.
    pub error: f64,
}

/// Sphere sums of one integrand: full grid, every second φ column, and `∫|φ|`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SphereSums {
    pub full: f64,
    pub half: f64,
    pub abs: f64,
}

impl SphereSums {
    /// `∫_{S_f} w φ` with pointwise weights `w` (the lapse for cone integrals, 1 on a single sphere).
    pub fn on(slice: &Slice, weight: impl Fn(usize) -> f64, values: &[f64]) -> Self {
        let n_phi = slice.sphere.n_phi;
        let terms: Vec<f64> = (0..slice.len())
            .map(|j| values[j] * weight(j) * slice.sphere.chart_weights[j] * slice.nodes[j].density)
            .collect();
        let half: Vec<f64> = terms
            .iter()
            .enumerate()
            .filter(|(j, _)| (j % n_phi).is_multiple_of(2))
            .map(|(_, t)| 2.0 * t)
            .collect();
        let abs: Vec<f64> = terms.iter().map(|t| t.abs()).collect();
        SphereSums {
            full: pairwise_sum(&terms),
            half: pairwise_sum(&half),
            abs: pairwise_sum(&abs),
        }
    }

    pub fn cone(slice: &Slice, values: &[f64]) -> Self {
        Self::on(slice, |j| slice.nodes[j].lapse, values)
    }

    pub fn sphere(slice: &Slice, values: &[f64]) -> Self {
        Self::on(slice, |_| 1.0, values)
    }

    /// A single sphere integral with its angular error estimate.
    pub fn as_integral(&self) -> ConeIntegral {
        ConeIntegral {
            value: self.full,
            error: (self.full - self.half).abs() + ROUNDOFF * self.abs,
        }
    }
}

fn trapezoid(nodes: &[f64], values: &[f64]) -> f64 {
    let slope = (values[1] - values[0]) / (nodes[1] - nodes[0]);
    let mut v = values.to_vec();
    v[0] -= nodes[0] * slope;
    let mut x = nodes.to_vec();
    x[0] = 0.0;
    let terms: Vec<f64> = (1..x.len())
        .map(|i| 0.5 * (x[i] - x[i - 1]) * (v[i] + v[i - 1]))
        .collect();
    pairwise_sum(&terms)
}

/// Integral over `v` of per-slice sphere sums; the error adds a Richardson estimate from the
/// coarse rule, the angular subsampling difference and a roundoff allowance.
pub(crate) fn integrate_slices(f_nodes: &[f64], sums: &[SphereSums]) -> ConeIntegral {
    let full: Vec<f64> = sums.iter().map(|s| s.full).collect();
    let half: Vec<f64> = sums.iter().map(|s| s.half).collect();
    let abs: Vec<f64> = sums.iter().map(|s| s.abs).collect();
    let value = vertex_simpson(f_nodes, &full);
    let radial = match vertex_simpson_coarse(f_nodes, &full) {
        Some(coarse) => (value - coarse).abs() / 15.0,
        None => (value - trapezoid(f_nodes, &full)).abs(),
    };
    let angular = (vertex_simpson(f_nodes, &half) - value).abs();
    let roundoff = ROUNDOFF * vertex_simpson(f_nodes, &abs);
    ConeIntegral {
        value,
        error: radial + angular + roundoff,
    }
}

/// `∫_N φ = ∫ dv ∫_{S_v} ϑ φ` for `φ(iv, j)` over the whole cone.
pub fn cone_integral(
    grid: &ConeGrid,
    integrand: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<ConeIntegral, ParametrixError> {
    let sums = (0..grid.f_nodes.len())
        .into_par_iter()
        .map(|iv| {
            let slice = Slice::new(grid, iv)?;
            let values: Vec<f64> = (0..slice.len()).map(|j| integrand(iv, j)).collect();
            Ok(SphereSums::cone(&slice, &values))
        })
        .collect::<Result<Vec<_>, ParametrixError>>()?;
    Ok(integrate_slices(&grid.f_nodes, &sums))
}
