use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::FiberOps;
use crate::horizontal::{
    generator_stencil, HorizontalError, OpticalScalars, Slice, GENERATOR_STENCIL,
};
use crate::nullcone::ConeGrid;
use crate::numerics::quadrature::vertex_simpson;

use super::quadrature::{integrate_slices, SphereSums};
use super::{covariant_jet, ParametrixError, SectionField};

/// Left minus right of the three integration-by-parts identities, each with the sum of the
/// magnitudes of its terms for scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IbpResiduals {
    /// `∫ ⟨S, ∇̄^a T_a⟩ + ∫ ⟨∇̄^a S, T_a⟩ + ∫ ∇^a(log ϑ) ⟨S, T_a⟩` with `T_a = D_{e_a} T`.
    pub horizontal: f64,
    /// `∫ ⟨S, △̸̄ T⟩ + ∫ ⟨∇̄^a S, ∇̄_a T⟩ + ∫ ∇^a(log ϑ) ⟨S, ∇̄_a T⟩`.
    pub laplacian: f64,
    /// `∫ ⟨S, ∇̄_L T⟩ + ∫ ⟨∇̄_L S, T⟩ + ∫ trχ ⟨S, T⟩ + ∫_{S_ε} ⟨S, T⟩ − ∫_{S_{v₀}} ⟨S, T⟩`.
    pub null: f64,
    pub scales: [f64; 3],
}

fn check_dims(fiber: &dyn FiberOps, fields: &[&SectionField]) -> Result<(), ParametrixError> {
    let expected = fiber.dim();
    for f in fields {
        if f.dim() != expected {
            return Err(ParametrixError::SpecMismatch {
                what: "field",
                expected,
                got: f.dim(),
            });
        }
    }
    Ok(())
}

fn require_complete(grid: &ConeGrid) -> Result<(), ParametrixError> {
    for iv in 0..grid.f_nodes.len() {
        for j in 0..grid.n_angles() {
            if grid.node(iv, j).is_none() {
                return Err(ParametrixError::IncompleteCone { iv, j });
            }
        }
    }
    Ok(())
}

fn add_scaled(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// `∇̄_L u = ϑ⁻¹ ∂_f u + ω(L) u` at every node, differencing along generators.
fn along_generators(
    fiber: &dyn FiberOps,
    grid: &ConeGrid,
    u: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, ParametrixError> {
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    let out = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<Vec<Vec<f64>>, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            let (start, w) = generator_stencil(&grid.f_nodes, iv, GENERATOR_STENCIL);
            Ok((0..n)
                .map(|j| {
                    let nd = slice.nodes[j];
                    let mut d = vec![0.0; fiber.dim()];
                    for (i, wi) in w.iter().enumerate() {
                        add_scaled(&mut d, *wi / nd.lapse, &u[(start + i) * n + j]);
                    }
                    add_scaled(
                        &mut d,
                        1.0,
                        &fiber.connect(&slice.geos[j], &nd.l, &u[iv * n + j]),
                    );
                    d
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn sample(grid: &ConeGrid, field: &SectionField) -> Vec<Vec<f64>> {
    let n = grid.n_angles();
    (0..grid.f_nodes.len() * n)
        .into_par_iter()
        .map(|k| field.value(&grid.node(k / n, k % n).expect("complete grid").x))
        .collect()
}

/// Discrete residuals of the horizontal, Laplacian and null integration-by-parts identities
/// for the sample sections `S` and `T`.
pub fn ibp_residuals(
    fiber: &dyn FiberOps,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    s: &SectionField,
    t: &SectionField,
) -> Result<IbpResiduals, ParametrixError> {
    check_dims(fiber, &[s, t])?;
    require_complete(grid)?;
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    let su = sample(grid, s);
    let tu = sample(grid, t);
    let ls = along_generators(fiber, grid, &su)?;
    let lt = along_generators(fiber, grid, &tu)?;

    // Per slice: nine cone integrands, then the two sphere integrals ⟨S, T⟩.
    let per_slice = (0..nv)
        .into_par_iter()
        .map(
            |iv| -> Result<([SphereSums; 9], SphereSums), HorizontalError> {
                let slice = Slice::new(grid, iv)?;
                let ss = &su[iv * n..(iv + 1) * n];
                let ts = &tu[iv * n..(iv + 1) * n];
                let gs = slice.fiber_gradient(fiber, ss);
                let gt = slice.fiber_gradient(fiber, ts);
                let lap_t = slice.fiber_laplacian(fiber, ts);
                let t_a: Vec<[Vec<f64>; 2]> = (0..n)
                    .map(|j| {
                        let jet = covariant_jet(fiber, t, &slice.geos[j]);
                        [0, 1].map(|a| jet.along(&slice.nodes[j].tangents[a]))
                    })
                    .collect();
                let t_up: Vec<[Vec<f64>; 2]> = t_a
                    .iter()
                    .enumerate()
                    .map(|(j, c)| slice.fiber_raise(j, c))
                    .collect();
                let div_t = slice.fiber_divergence(fiber, &t_up);
                let log_lapse: Vec<f64> = slice.nodes.iter().map(|nd| nd.lapse.ln()).collect();
                let dlog = slice.gradient(&log_lapse);
                let mut cols: [Vec<f64>; 9] = Default::default();
                let mut st = Vec::with_capacity(n);
                for j in 0..n {
                    let geo = &slice.geos[j];
                    let inner = |x: &[f64], y: &[f64]| fiber.inner(geo, x, y);
                    let gs_up = slice.fiber_raise(j, &gs[j]);
                    let dlog_up = slice.raise(j, &dlog[j]);
                    let k = iv * n + j;
                    cols[0].push(inner(&ss[j], &div_t[j]));
                    cols[1].push(inner(&gs_up[0], &t_a[j][0]) + inner(&gs_up[1], &t_a[j][1]));
                    cols[2].push((0..2).map(|a| dlog_up[a] * inner(&ss[j], &t_a[j][a])).sum());
                    cols[3].push(inner(&ss[j], &lap_t[j]));
                    cols[4].push(inner(&gs_up[0], &gt[j][0]) + inner(&gs_up[1], &gt[j][1]));
                    cols[5].push((0..2).map(|a| dlog_up[a] * inner(&ss[j], &gt[j][a])).sum());
                    cols[6].push(inner(&ss[j], &lt[k]));
                    cols[7].push(inner(&ls[k], &ts[j]));
                    cols[8].push(scalars.at(iv, j).tr_chi * inner(&ss[j], &ts[j]));
                    st.push(inner(&ss[j], &ts[j]));
                }
                Ok((
                    cols.map(|c| SphereSums::cone(&slice, &c)),
                    SphereSums::sphere(&slice, &st),
                ))
            },
        )
        .collect::<Result<Vec<_>, _>>()?;

    let cone: Vec<f64> = (0..6)
        .map(|k| {
            integrate_slices(
                &grid.f_nodes,
                &per_slice.iter().map(|p| p.0[k]).collect::<Vec<_>>(),
            )
            .value
        })
        .collect();
    // The null identity runs over [ε₀, v₀]: drop the first sub-interval's trapezoid share.
    let null_part = |k: usize| {
        let g: Vec<f64> = per_slice.iter().map(|p| p.0[k].full).collect();
        let f = &grid.f_nodes;
        let slope = (g[1] - g[0]) / (f[1] - f[0]);
        vertex_simpson(f, &g) - 0.5 * f[0] * (2.0 * g[0] - f[0] * slope)
    };
    let null_terms = [
        null_part(6),
        null_part(7),
        null_part(8),
        per_slice[0].1.full,
        -per_slice[nv - 1].1.full,
    ];
    let sum_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    Ok(IbpResiduals {
        horizontal: cone[0] + cone[1] + cone[2],
        laplacian: cone[3] + cone[4] + cone[5],
        null: null_terms.iter().sum(),
        scales: [
            sum_abs(&cone[0..3]),
            sum_abs(&cone[3..6]),
            sum_abs(&null_terms),
        ],
    })
}

/// Per-node norm of `□T` minus its null decomposition
/// `△̸̄T − ∇̄_L(D₃T) + 2η̄^a ∇̄_a T − ½ trχ̲ ∇̄_L T − ½ trχ D₃T + ½ R(L, L̲) T`.
///
/// `□T` comes from the exact jets of `T`; the right side from cone calculus, except `D₃T`,
/// which is transversal to the cone and is read from the jets as well.
pub fn box_decomposition_residual(
    fiber: &dyn FiberOps,
    field: &SectionField,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
) -> Result<Vec<f64>, ParametrixError> {
    check_dims(fiber, &[field])?;
    require_complete(grid)?;
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    struct Pointwise {
        value: Vec<f64>,
        wave: Vec<f64>,
        d3: Vec<f64>,
        r43: Vec<f64>,
    }
    let pts: Vec<Pointwise> = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<Vec<Pointwise>, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            Ok((0..n)
                .map(|j| {
                    let geo = &slice.geos[j];
                    let nd = slice.nodes[j];
                    let jet = covariant_jet(fiber, field, geo);
                    Pointwise {
                        wave: jet.wave(geo),
                        d3: jet.along(&nd.lb),
                        r43: fiber.curvature(geo, &geo.curvature(), &nd.l, &nd.lb, &jet.value),
                        value: jet.value,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let values: Vec<Vec<f64>> = pts.iter().map(|p| p.value.clone()).collect();
    let d3: Vec<Vec<f64>> = pts.iter().map(|p| p.d3.clone()).collect();
    let l_t = along_generators(fiber, grid, &values)?;
    let l_d3 = along_generators(fiber, grid, &d3)?;
    let out = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<Vec<f64>, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            let ts = &values[iv * n..(iv + 1) * n];
            let lap = slice.fiber_laplacian(fiber, ts);
            let gt = slice.fiber_gradient(fiber, ts);
            Ok((0..n)
                .map(|j| {
                    let k = iv * n + j;
                    let sc = scalars.at(iv, j);
                    let etab_up = slice.raise(j, &sc.etab_chart);
                    let mut r = pts[k].wave.clone();
                    add_scaled(&mut r, -1.0, &lap[j]);
                    add_scaled(&mut r, 1.0, &l_d3[k]);
                    // η̄^a ∇̄_a T = η̄_A λ^{AB} ∇̄_B T
                    for a in 0..2 {
                        add_scaled(&mut r, -2.0 * etab_up[a], &gt[j][a]);
                    }
                    add_scaled(&mut r, 0.5 * sc.tr_chib, &l_t[k]);
                    add_scaled(&mut r, 0.5 * sc.tr_chi, &pts[k].d3);
                    add_scaled(&mut r, -0.5, &pts[k].r43);
                    r.iter().map(|x| x * x).sum::<f64>().sqrt()
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(out.into_iter().flatten().collect())
}
