use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{CouplingOps, FiberOps};
use crate::geometry::LocalGeometry;
use crate::horizontal::{
    generator_stencil, HorizontalError, OpticalScalars, Slice, GENERATOR_STENCIL,
};
use crate::nullcone::ConeGrid;
use crate::transport::TransportKernel;

use super::quadrature::{integrate_slices, ConeIntegral, SphereSums};
use super::{ParametrixError, WaveSystem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TermErrors {
    pub f: f64,
    pub e1: f64,
    pub e1_alt: f64,
    pub e2: f64,
    pub i: f64,
}

/// The four integrals that make up `E²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct E2Parts {
    /// `∫ μ ⟨A, Φ⟩`.
    pub mass: f64,
    /// `½ ∫ ⟨A, R(L, L̲) Φ⟩`.
    pub curvature: f64,
    /// `−∫ ⟨∇̄^a A, K(e_a) Φ⟩`.
    pub coupling_gradient: f64,
    /// `∫ ⟨A, ν Φ⟩`.
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParametrixBreakdown {
    pub f: f64,
    pub e1: f64,
    pub e1_alt: f64,
    pub e2: f64,
    pub i: f64,
    /// `4π ϑ₀ ⟨J, Φ(p)⟩`.
    pub lhs: f64,
    /// `lhs − (F + E¹ + E² + I)`.
    pub residual: f64,
    pub e2_parts: E2Parts,
    pub errors: TermErrors,
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakdownRow {
    pub case: String,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_v: usize,
    pub f: f64,
    pub e1: f64,
    pub e1_alt: f64,
    pub e2: f64,
    pub i: f64,
    pub lhs: f64,
    pub residual: f64,
    pub budget: f64,
}

impl ParametrixBreakdown {
    /// Combined error estimate of `F + E¹ + E² + I`.
    pub fn budget(&self) -> f64 {
        self.errors.f + self.errors.e1 + self.errors.e2 + self.errors.i
    }

    pub fn row(&self, case: &str, grid: &ConeGrid) -> BreakdownRow {
        BreakdownRow {
            case: case.to_string(),
            n_theta: grid.config.n_theta,
            n_phi: grid.config.n_phi,
            n_v: grid.config.n_v,
            f: self.f,
            e1: self.e1,
            e1_alt: self.e1_alt,
            e2: self.e2,
            i: self.i,
            lhs: self.lhs,
            residual: self.residual,
            budget: self.budget(),
        }
    }
}

/// The ε-sphere terms `½∫ trχ̲ ⟨A, Φ⟩`, `∫ ⟨A, D₃Φ⟩`, `½∫ ⟨A, K(L̲)Φ⟩` on one slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VertexTerms {
    pub f: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

fn require_complete(
    grid: &ConeGrid,
    kernel: Option<&TransportKernel>,
) -> Result<(), ParametrixError> {
    for iv in 0..grid.f_nodes.len() {
        for j in 0..grid.n_angles() {
            if grid.node(iv, j).is_none() || kernel.is_some_and(|k| k.b(iv, j).is_none()) {
                return Err(ParametrixError::IncompleteCone { iv, j });
            }
        }
    }
    Ok(())
}

fn check_kernel(system: &WaveSystem, kernel: &TransportKernel) -> Result<(), ParametrixError> {
    system.validate()?;
    if kernel.dim != system.dim() {
        return Err(ParametrixError::SpecMismatch {
            what: "kernel",
            expected: system.dim(),
            got: kernel.dim,
        });
    }
    if kernel.seed != system.seed {
        return Err(ParametrixError::SeedMismatch);
    }
    Ok(())
}

fn add_scaled(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// `ν U` at every node (`index = iv · N + j`) for a section `U` sampled on the cone:
/// `ν = −∇̄^a K_a + ½ ∇̄_L(K(L̲)) − (ζ + η̄)^a K_a + ¼ trχ̲ K(L) + ¼ trχ K(L̲) + ¼ K(L) K(L̲)`.
///
/// Horizontal derivatives are spectral on each sphere, `∇̄_L` is differenced along generators.
pub fn nu_action(
    fiber: &dyn FiberOps,
    coupling: &dyn CouplingOps,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    u: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, ParametrixError> {
    require_complete(grid, None)?;
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    let dim = fiber.dim();
    if coupling.is_zero() {
        return Ok(vec![vec![0.0; dim]; nv * n]);
    }
    let node = |k: usize| grid.node(k / n, k % n).expect("complete grid");
    let w: Vec<Vec<f64>> = (0..nv * n)
        .into_par_iter()
        .map(|k| coupling.apply(&node(k).x, &node(k).lb, &u[k]))
        .collect();
    let per_slice = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<Vec<Vec<f64>>, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            let us = &u[iv * n..(iv + 1) * n];
            let gu = slice.fiber_gradient(fiber, us);
            let kx: Vec<[Vec<f64>; 2]> = (0..n)
                .map(|j| {
                    let nd = slice.nodes[j];
                    [0, 1].map(|a| coupling.apply(&nd.x, &nd.tangents[a], &us[j]))
                })
                .collect();
            let z: Vec<[Vec<f64>; 2]> = kx
                .iter()
                .enumerate()
                .map(|(j, k)| slice.fiber_raise(j, k))
                .collect();
            let div_z = slice.fiber_divergence(fiber, &z);
            let (start, wts) = generator_stencil(&grid.f_nodes, iv, GENERATOR_STENCIL);
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                let nd = slice.nodes[j];
                let geo = &slice.geos[j];
                let sc = scalars.at(iv, j);
                let k = iv * n + j;
                let mut dw = vec![0.0; dim];
                let mut du = vec![0.0; dim];
                for (i, wi) in wts.iter().enumerate() {
                    add_scaled(&mut dw, *wi, &w[(start + i) * n + j]);
                    add_scaled(&mut du, *wi, &u[(start + i) * n + j]);
                }
                let along_l = |d: Vec<f64>, v: &[f64]| -> Vec<f64> {
                    let mut r: Vec<f64> = d.iter().map(|x| x / nd.lapse).collect();
                    add_scaled(&mut r, 1.0, &fiber.connect(geo, &nd.l, v));
                    r
                };
                let lw = along_l(dw, &w[k]);
                let lu = along_l(du, &u[k]);
                let gu_up = slice.fiber_raise(j, &gu[j]);
                let zeta_up = slice.raise(j, &sc.zeta_chart);
                let etab_up = slice.raise(j, &sc.etab_chart);

                let mut v = vec![0.0; dim];
                // −∇̄^a K_a
                add_scaled(&mut v, -1.0, &div_z[j]);
                for a in 0..2 {
                    add_scaled(
                        &mut v,
                        1.0,
                        &coupling.apply(&nd.x, &nd.tangents[a], &gu_up[a]),
                    );
                }
                // ½ ∇̄_L(K(L̲) u) − ½ K(L̲) ∇̄_L u
                add_scaled(&mut v, 0.5, &lw);
                add_scaled(&mut v, -0.5, &coupling.apply(&nd.x, &nd.lb, &lu));
                for a in 0..2 {
                    add_scaled(&mut v, -zeta_up[a] - etab_up[a], &kx[j][a]);
                }
                let k4 = coupling.apply(&nd.x, &nd.l, &u[k]);
                add_scaled(&mut v, 0.25 * sc.tr_chib, &k4);
                add_scaled(&mut v, 0.25 * sc.tr_chi, &w[k]);
                add_scaled(&mut v, 0.25, &coupling.apply(&nd.x, &nd.l, &w[k]));
                out.push(v);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_slice.into_iter().flatten().collect())
}

/// Pointwise data of `Φ` needed by the formula.
struct NodeSample {
    phi: Vec<f64>,
    psi: Vec<f64>,
    /// `X_A^μ D_μ Φ`.
    dx: [Vec<f64>; 2],
    /// `D₃ Φ = D_{L̲} Φ`.
    d3: Vec<f64>,
    /// `K(L̲) Φ`.
    k3: Vec<f64>,
    /// `R(L, L̲) Φ`.
    r43: Vec<f64>,
}

fn sample_slice(system: &WaveSystem, slice: &Slice) -> Vec<NodeSample> {
    (0..slice.len())
        .map(|j| {
            let nd = slice.nodes[j];
            let geo = &slice.geos[j];
            let jet = system.jet(geo);
            let curv = geo.curvature();
            NodeSample {
                psi: system.source_at(geo, &jet),
                dx: [0, 1].map(|a| jet.along(&nd.tangents[a])),
                d3: jet.along(&nd.lb),
                k3: system.coupling.apply(&nd.x, &nd.lb, &jet.value),
                r43: system
                    .fiber
                    .curvature(geo, &curv, &nd.l, &nd.lb, &jet.value),
                phi: jet.value,
            }
        })
        .collect()
}

#[derive(Default)]
struct SliceTerms {
    f: SphereSums,
    e1: SphereSums,
    e1_alt: SphereSums,
    e2: [SphereSums; 4],
}

/// Evaluates every term of the representation formula on the cone of `grid`.
pub fn evaluate_parametrix(
    system: &WaveSystem,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: &TransportKernel,
) -> Result<ParametrixBreakdown, ParametrixError> {
    check_kernel(system, kernel)?;
    require_complete(grid, Some(kernel))?;
    let fiber = system.fiber.as_ref();
    let coupling = system.coupling.as_ref();
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();

    let samples: Vec<Vec<NodeSample>> = (0..nv)
        .into_par_iter()
        .map(|iv| Slice::new(grid, iv).map(|s| sample_slice(system, &s)))
        .collect::<Result<_, _>>()?;
    let phi: Vec<Vec<f64>> = samples.iter().flatten().map(|s| s.phi.clone()).collect();
    let nu_phi = nu_action(fiber, coupling, grid, scalars, &phi)?;
    let coupled = !coupling.is_zero();

    let terms: Vec<SliceTerms> = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<SliceTerms, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            let smp = &samples[iv];
            let a: Vec<Vec<f64>> = (0..n)
                .map(|j| kernel.a(iv, j).expect("complete kernel"))
                .collect();
            let ga = slice.fiber_gradient(fiber, &a);
            let lap_a = slice.fiber_laplacian(fiber, &a);
            let mut cols: [Vec<f64>; 7] = Default::default();
            for j in 0..n {
                let nd = slice.nodes[j];
                let geo = &slice.geos[j];
                let sc = scalars.at(iv, j);
                let s = &smp[j];
                let inner = |x: &[f64], y: &[f64]| fiber.inner(geo, x, y);
                let ga_up = slice.fiber_raise(j, &ga[j]);
                let a_phi = inner(&a[j], &s.phi);
                let grad_a_phi = [0, 1].map(|b| inner(&ga_up[b], &s.phi));
                cols[0].push(-inner(&a[j], &s.psi));
                cols[1].push(
                    -(inner(&ga_up[0], &s.dx[0]) + inner(&ga_up[1], &s.dx[1]))
                        + (0..2)
                            .map(|b| (sc.zeta_chart[b] - sc.etab_chart[b]) * grad_a_phi[b])
                            .sum::<f64>(),
                );
                cols[2].push(
                    inner(&lap_a[j], &s.phi)
                        + 2.0
                            * (0..2)
                                .map(|b| sc.zeta_chart[b] * grad_a_phi[b])
                                .sum::<f64>(),
                );
                cols[3].push(sc.mu * a_phi);
                cols[4].push(0.5 * inner(&a[j], &s.r43));
                cols[5].push(if coupled {
                    -(0..2)
                        .map(|b| inner(&ga_up[b], &coupling.apply(&nd.x, &nd.tangents[b], &s.phi)))
                        .sum::<f64>()
                } else {
                    0.0
                });
                cols[6].push(inner(&a[j], &nu_phi[iv * n + j]));
            }
            let sums = cols.map(|c| SphereSums::cone(&slice, &c));
            Ok(SliceTerms {
                f: sums[0],
                e1: sums[1],
                e1_alt: sums[2],
                e2: [sums[3], sums[4], sums[5], sums[6]],
            })
        })
        .collect::<Result<_, _>>()?;

    let cone = |pick: &dyn Fn(&SliceTerms) -> SphereSums| -> ConeIntegral {
        integrate_slices(&grid.f_nodes, &terms.iter().map(pick).collect::<Vec<_>>())
    };
    let f = cone(&|t| t.f);
    let e1 = cone(&|t| t.e1);
    let e1_alt = cone(&|t| t.e1_alt);
    let parts: Vec<ConeIntegral> = (0..4).map(|k| cone(&|t| t.e2[k])).collect();
    let i = initial_terms(system, grid, scalars, kernel, &samples[nv - 1])?;

    let p = grid.config.vertex.coords;
    let geo_p = LocalGeometry::at(grid.provider.as_ref(), &p).map_err(HorizontalError::from)?;
    let lhs = 4.0 * PI * grid.lapse0 * fiber.inner(&geo_p, &system.seed, &system.field.value(&p));

    let e2 = parts.iter().map(|c| c.value).sum::<f64>();
    let residual = lhs - (f.value + e1.value + e2 + i.value);
    Ok(ParametrixBreakdown {
        f: f.value,
        e1: e1.value,
        e1_alt: e1_alt.value,
        e2,
        i: i.value,
        lhs,
        residual,
        e2_parts: E2Parts {
            mass: parts[0].value,
            curvature: parts[1].value,
            coupling_gradient: parts[2].value,
            nu: parts[3].value,
        },
        errors: TermErrors {
            f: f.error,
            e1: e1.error,
            e1_alt: e1_alt.error,
            e2: parts.iter().map(|c| c.error).sum(),
            i: i.error,
        },
    })
}

/// `I = −½∫ trχ̲ ⟨A, Φ⟩ − ∫ ⟨A, D₃Φ⟩ − ½∫ ⟨A, K(L̲)Φ⟩` over the last sphere.
fn initial_terms(
    system: &WaveSystem,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: &TransportKernel,
    samples: &[NodeSample],
) -> Result<ConeIntegral, ParametrixError> {
    let iv = grid.f_nodes.len() - 1;
    let [l0, l1, l2] = sphere_terms(system, grid, scalars, kernel, iv, samples)?;
    Ok(ConeIntegral {
        value: -(l0.value + l1.value + l2.value),
        error: l0.error + l1.error + l2.error,
    })
}

fn sphere_terms(
    system: &WaveSystem,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: &TransportKernel,
    iv: usize,
    samples: &[NodeSample],
) -> Result<[ConeIntegral; 3], ParametrixError> {
    let slice = Slice::new(grid, iv)?;
    let fiber = system.fiber.as_ref();
    let mut cols: [Vec<f64>; 3] = Default::default();
    for (j, s) in samples.iter().enumerate() {
        let geo = &slice.geos[j];
        let a = kernel
            .a(iv, j)
            .ok_or(ParametrixError::IncompleteCone { iv, j })?;
        cols[0].push(0.5 * scalars.at(iv, j).tr_chib * fiber.inner(geo, &a, &s.phi));
        cols[1].push(fiber.inner(geo, &a, &s.d3));
        cols[2].push(0.5 * fiber.inner(geo, &a, &s.k3));
    }
    Ok(cols.map(|c| SphereSums::sphere(&slice, &c).as_integral()))
}

/// The ε-sphere terms on slice `iv`; they tend to `(−4π ϑ₀ ⟨J, Φ(p)⟩, 0, 0)` at the vertex.
pub fn vertex_terms(
    system: &WaveSystem,
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: &TransportKernel,
    iv: usize,
) -> Result<VertexTerms, ParametrixError> {
    check_kernel(system, kernel)?;
    let slice = Slice::new(grid, iv)?;
    let samples = sample_slice(system, &slice);
    let [l0, l1, l2] = sphere_terms(system, grid, scalars, kernel, iv, &samples)?;
    Ok(VertexTerms {
        f: grid.f_nodes[iv],
        l0: l0.value,
        l1: l1.value,
        l2: l2.value,
    })
}
