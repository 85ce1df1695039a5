use std::f64::consts::PI;

use serde::Serialize;

use crate::horizontal::{HorizontalError, OpticalScalars, Slice};
use crate::nullcone::ConeGrid;
use crate::numerics::quadrature::vertex_value;
use crate::transport::TransportKernel;

/// Largest deviation over generators of each extrapolated vertex limit from its target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct VertexLimitReport {
    /// `s/f → ϑ₀`.
    pub s_over_f: f64,
    /// `f trχ̲ → −2/ϑ₀`.
    pub f_tr_chib: f64,
    /// `ϑ trχ − 2/f → 0`.
    pub lapse_tr_chi: f64,
    /// `ϑ trχ − 2/f → L(ϑ)` at the vertex, the limit for a lapse that is not stationary there.
    pub lapse_tr_chi_rate: f64,
    /// `f⁻² area(S_f) → 4π ϑ₀²`.
    pub area: f64,
    /// `B → J`, relative to `|J|`; zero without a kernel.
    pub kernel: f64,
    /// Largest `|L(ϑ)|` at the vertex.
    pub lapse_rate: f64,
}

/// Quadratic Richardson extrapolation to `f = 0` from the first three regular slices.
fn extrapolate(f: &[f64; 3], q: [f64; 3]) -> f64 {
    vertex_value(f, &q)
}

/// `dϑ/ds` at the vertex from the cubic through `(0, ϑ₀)` and the first three regular slices.
fn lapse_rate(lapse0: f64, s: [f64; 3], lapse: [f64; 3]) -> f64 {
    let nodes = [0.0, s[0], s[1], s[2]];
    let values = [lapse0, lapse[0], lapse[1], lapse[2]];
    // Derivative at 0 of the Lagrange interpolant.
    (0..4)
        .map(|i| {
            let mut d = 0.0;
            for m in (0..4).filter(|&m| m != i) {
                let mut term = 1.0 / (nodes[i] - nodes[m]);
                for k in (0..4).filter(|&k| k != i && k != m) {
                    term *= (0.0 - nodes[k]) / (nodes[i] - nodes[k]);
                }
                d += term;
            }
            d * values[i]
        })
        .sum()
}

/// Extrapolates every vertex-limit quantity per generator and compares it with its target.
pub fn vertex_limit_suite(
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: Option<&TransportKernel>,
) -> Result<VertexLimitReport, HorizontalError> {
    let slices = [1, 2, 3];
    let f = slices.map(|iv| grid.f_nodes[iv]);
    let theta0 = grid.lapse0;
    let mut r = VertexLimitReport::default();
    for j in 0..grid.n_angles() {
        let nodes = slices.map(|iv| {
            grid.node(iv, j)
                .ok_or(HorizontalError::MaskedNode { iv, j })
        });
        let nodes = [nodes[0].clone()?, nodes[1].clone()?, nodes[2].clone()?];
        let q = slices.map(|iv| scalars.at(iv, j));
        let s_over_f = extrapolate(&f, [0, 1, 2].map(|k| nodes[k].s / f[k]));
        let f_tr_chib = extrapolate(&f, [0, 1, 2].map(|k| f[k] * q[k].tr_chib));
        let defect = extrapolate(&f, q.map(|q| q.lapse_tr_chi_defect));
        let rate = lapse_rate(theta0, nodes.map(|n| n.s), nodes.map(|n| n.lapse));
        r.s_over_f = r.s_over_f.max((s_over_f - theta0).abs());
        r.f_tr_chib = r.f_tr_chib.max((f_tr_chib + 2.0 / theta0).abs());
        r.lapse_tr_chi = r.lapse_tr_chi.max(defect.abs());
        r.lapse_tr_chi_rate = r.lapse_tr_chi_rate.max((defect - rate).abs());
        r.lapse_rate = r.lapse_rate.max(rate.abs());
        if let Some(k) = kernel {
            let b0 = k
                .vertex_value(j)
                .ok_or(HorizontalError::MaskedNode { iv: 0, j })?;
            let norm = k
                .seed
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let dev = b0
                .iter()
                .zip(&k.seed)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            r.kernel = r.kernel.max(dev / norm);
        }
    }
    let mut area = [0.0; 3];
    for (k, &iv) in slices.iter().enumerate() {
        let slice = Slice::new(grid, iv)?;
        area[k] = slice.integral(&vec![1.0; slice.len()]) / (f[k] * f[k]);
    }
    r.area = (extrapolate(&f, area) - 4.0 * PI * theta0 * theta0).abs();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lapse_rate_differentiates_cubics_exactly() {
        let p = |s: f64| 1.2 - 0.3 * s + 0.5 * s * s - 0.1 * s * s * s;
        let s = [0.1, 0.25, 0.4];
        assert!((lapse_rate(p(0.0), s, s.map(p)) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_is_exact_for_quadratics() {
        let q = |f: f64| 2.0 + f - 3.0 * f * f;
        let f = [0.1, 0.2, 0.3];
        assert!((extrapolate(&f, f.map(q)) - 2.0).abs() < 1e-12);
    }
}
