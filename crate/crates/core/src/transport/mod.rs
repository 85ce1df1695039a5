//! Transport kernels `B` (and `A = B / f`) along the generators of a cone.
//!
//! Along each generator
//! `dB/df = −ϑ ω(L) B − ½ (ϑ tr χ − 2/f) B + ½ ϑ K(L)† B`, with `K† = H⁻¹ Kᵀ H`,
//! integrated in coordinate fiber components together with the generator itself.


use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{CouplingOps, FiberOps};
use crate::geometry::{LocalGeometry, Vec4};
use crate::horizontal::{generator_stencil, OpticalScalars};
use crate::nullcone::{ConeGrid, GeneratorExtension, GeneratorState, GEOMETRIC_DIM};

/// Kernels whose norm exceeds this are reported as a blow-up.
pub const OVERFLOW_GUARD: f64 = 1e100;

/// Stencil width for the residual check; one order above the cone quadrature.
pub const RESIDUAL_STENCIL: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("fiber dimension {fiber} does not match {what} dimension {got}")]
    DimensionMismatch {
        fiber: usize,
        what: &'static str,
        got: usize,
    },
    #[error("transport kernel blew up on generator {generator} at f = {f}")]
    TransportBlowup { generator: usize, f: f64 },
}

#[derive(Clone, Debug)]
pub struct TransportKernel {
    pub dim: usize,
    pub n_angles: usize,
    pub f_nodes: Vec<f64>,
    /// Value `J` at the vertex.
    pub seed: Vec<f64>,
    /// `B` per node (`index = iv · N + j`), `None` on masked generators.
    b: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelRow {
    pub iv: usize,
    pub j: usize,
    pub component: usize,
    pub b: f64,
}

impl TransportKernel {
    pub fn b(&self, iv: usize, j: usize) -> Option<&[f64]> {
        self.b[iv * self.n_angles + j].as_deref()
    }

    /// `A = B / f`.
    pub fn a(&self, iv: usize, j: usize) -> Option<Vec<f64>> {
        let f = self.f_nodes[iv];
        self.b(iv, j).map(|b| b.iter().map(|v| v / f).collect())
    }

    pub fn is_masked(&self, j: usize) -> bool {
        self.b[j].is_none()
    }

    pub fn is_complete(&self) -> bool {
        self.b.iter().all(Option::is_some)
    }

    /// `B` at the vertex by quadratic extrapolation through the first three slices.
    pub fn vertex_value(&self, j: usize) -> Option<Vec<f64>> {
        let f = &self.f_nodes[..3];
        let w: Vec<f64> = (0..3)
            .map(|i| {
                (0..3)
                    .filter(|&k| k != i)
                    .map(|k| (0.0 - f[k]) / (f[i] - f[k]))
                    .product()
            })
            .collect();
        let mut out = vec![0.0; self.dim];
        for (iv, wi) in w.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.b(iv, j)?) {
                *o += wi * v;
            }
        }
        Some(out)
    }

    pub fn rows(&self) -> Vec<KernelRow> {
        let mut rows = Vec::new();
        for iv in 0..self.f_nodes.len() {
            for j in 0..self.n_angles {
                if let Some(b) = self.b(iv, j) {
                    rows.extend(b.iter().enumerate().map(|(component, &b)| KernelRow {
                        iv,
                        j,
                        component,
                        b,
                    }));
                }
            }
        }
        rows
    }
}

/// `dB/df` at a point of a generator, given the bracket `ϑ tr χ − 2/f`.
#[allow(clippy::too_many_arguments)]
pub fn transport_rate(
    fiber: &dyn FiberOps,
    coupling: &dyn CouplingOps,
    geo: &LocalGeometry,
    x: &Vec4,
    l: &Vec4,
    lapse: f64,
    bracket: f64,
    b: &[f64],
) -> Vec<f64> {
    let conn = fiber.connect(geo, l, b);
    let mut out: Vec<f64> = b
        .iter()
        .zip(&conn)
        .map(|(v, c)| -lapse * c - 0.5 * bracket * v)
        .collect();
    if !coupling.is_zero() {
        let adj = fiber.raise(geo, &coupling.apply_transpose(x, l, &fiber.lower(geo, b)));
        for (o, a) in out.iter_mut().zip(adj) {
            *o += 0.5 * lapse * a;
        }
    }
    out
}

struct KernelExtension<'a> {
    fiber: &'a dyn FiberOps,
    coupling: &'a dyn CouplingOps,
    seed: &'a [f64],
}

impl KernelExtension<'_> {
    fn rate(&self, state: &GeneratorState, b: &[f64]) -> Vec<f64> {
        let bracket = state.lapse * state.tr_chi() - 2.0 / state.f;
        transport_rate(
            self.fiber,
            self.coupling,
            state.geo,
            &state.x,
            &state.l,
            state.lapse,
            bracket,
            b,
        )
    }
}

impl GeneratorExtension for KernelExtension<'_> {
    fn dim(&self) -> usize {
        self.seed.len()
    }

    /// `J` plus one explicit step from the vertex.
    fn seed(&self, state: &GeneratorState) -> Vec<f64> {
        let rate = self.rate(state, self.seed);
        self.seed
            .iter()
            .zip(rate)
            .map(|(j, r)| j + state.f * r)
            .collect()
    }

    fn rhs(&self, state: &GeneratorState, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        dy.copy_from_slice(&self.rate(state, y));
        Ok(())
    }
}

/// Solves for `B` on every generator that is valid in `grid`; the others are masked.
pub fn solve_transport(
    grid: &ConeGrid,
    fiber: &dyn FiberOps,
    coupling: &dyn CouplingOps,
    seed: &[f64],
) -> Result<TransportKernel, TransportError> {
    let dim = fiber.dim();
    if seed.len() != dim {
        return Err(TransportError::DimensionMismatch {
            fiber: dim,
            what: "seed",
            got: seed.len(),
        });
    }
    if coupling.dim() != dim {
        return Err(TransportError::DimensionMismatch {
            fiber: dim,
            what: "coupling",
            got: coupling.dim(),
        });
    }
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    let run = grid.generator_run();
    let ext = KernelExtension {
        fiber,
        coupling,
        seed,
    };
    let per_generator: Vec<Result<Option<Vec<Vec<f64>>>, TransportError>> = (0..n)
        .into_par_iter()
        .map(|j| {
            if (0..nv).any(|iv| grid.node(iv, j).is_none()) {
                return Ok(None);
            }
            let (states, failure) = run.integrate(&grid.seeds[j], &ext, &grid.f_nodes);
            if failure.is_some() || states.len() != nv {
                return Ok(None);
            }
            let mut out = Vec::with_capacity(nv);
            for (iv, y) in states.into_iter().enumerate() {
                let b = y[GEOMETRIC_DIM..].to_vec();
                let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm <= OVERFLOW_GUARD) {
                    return Err(TransportError::TransportBlowup {
                        generator: j,
                        f: grid.f_nodes[iv],
                    });
                }
                out.push(b);
            }
            Ok(Some(out))
        })
        .collect();
    let mut b = vec![None; nv * n];
    for (j, res) in per_generator.into_iter().enumerate() {
        if let Some(values) = res? {
            for (iv, v) in values.into_iter().enumerate() {
                b[iv * n + j] = Some(v);
            }
        }
    }
    Ok(TransportKernel {
        dim,
        n_angles: n,
        f_nodes: grid.f_nodes.clone(),
        seed: seed.to_vec(),
        b,
    })
}

/// Euclidean norm of `dB/df − rate(B)` per node, with `dB/df` from a finite-difference stencil
/// along the generator; masked nodes give `NaN`.
pub fn transport_residual(
    grid: &ConeGrid,
    scalars: &OpticalScalars,
    kernel: &TransportKernel,
    fiber: &dyn FiberOps,
    coupling: &dyn CouplingOps,
) -> Vec<f64> {
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    (0..nv * n)
        .into_par_iter()
        .map(|k| {
            let (iv, j) = (k / n, k % n);
            let (Some(node), Some(b)) = (grid.node(iv, j), kernel.b(iv, j)) else {
                return f64::NAN;
            };
            let Ok(geo) = LocalGeometry::at(grid.provider.as_ref(), &node.x) else {
                return f64::NAN;
            };
            let (start, w) = generator_stencil(&grid.f_nodes, iv, RESIDUAL_STENCIL);
            let mut d = vec![0.0; kernel.dim];
            for (i, wi) in w.iter().enumerate() {
                let Some(bi) = kernel.b(start + i, j) else {
                    return f64::NAN;
                };
                for (dc, v) in d.iter_mut().zip(bi) {
                    *dc += wi * v;
                }
            }
            let bracket = scalars.at(iv, j).lapse_tr_chi_defect;
            let rate = transport_rate(
                fiber, coupling, &geo, &node.x, &node.l, node.lapse, bracket, b,
            );
            d.iter()
                .zip(&rate)
                .map(|(a, r)| (a - r) * (a - r))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}
