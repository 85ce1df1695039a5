//! Horizontal calculus on the cone: Ricci coefficients, mass aspect function and the
//! structure-equation residuals.

mod slice;


use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{axpy, GeometryError, Vec4};
use crate::nullcone::ConeGrid;
use crate::numerics::fd::stencil;

pub use slice::{Chart2, Slice, Sym2};

/// Width of the finite-difference stencil used for derivatives along generators.
pub const GENERATOR_STENCIL: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HorizontalError {
    #[error("node ({iv}, {j}) lies on an invalid generator")]
    MaskedNode { iv: usize, j: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ricci coefficients and curvature components at one node, in the adapted frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeScalars {
    pub tr_chi: f64,
    /// `ϑ trχ − 2/f`, finite at the vertex.
    pub lapse_tr_chi_defect: f64,
    pub chi_hat: Sym2,
    pub tr_chib: f64,
    pub chib_hat: Sym2,
    pub zeta: Chart2,
    pub etab: Chart2,
    /// `ζ(X_A)`.
    pub zeta_chart: Chart2,
    /// `η̄(X_A)`.
    pub etab_chart: Chart2,
    pub mu: f64,
    pub div_zeta: f64,
    /// `R(L, L̲, L, L̲)`.
    pub r4343: f64,
    /// `Ric(L, L̲)`.
    pub r43: f64,
    /// `D_L L̲`.
    pub lb_rate: Vec4,
}

pub struct OpticalScalars {
    n_angles: usize,
    pub nodes: Vec<NodeScalars>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalarRow {
    pub iv: usize,
    pub j: usize,
    pub tr_chi: f64,
    pub chi_hat_11: f64,
    pub chi_hat_12: f64,
    pub tr_chib: f64,
    pub chib_hat_11: f64,
    pub chib_hat_12: f64,
    pub zeta_1: f64,
    pub zeta_2: f64,
    pub etab_1: f64,
    pub etab_2: f64,
    pub mu: f64,
}

impl OpticalScalars {
    /// Ricci coefficients from their definitions followed by the mass aspect function.
    pub fn compute(grid: &ConeGrid) -> Result<Self, HorizontalError> {
        let mut s = ricci_coefficients(grid)?;
        mass_aspect(grid, &mut s)?;
        Ok(s)
    }

    pub fn at(&self, iv: usize, j: usize) -> &NodeScalars {
        &self.nodes[iv * self.n_angles + j]
    }

    pub fn rows(&self) -> Vec<ScalarRow> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, s)| ScalarRow {
                iv: k / self.n_angles,
                j: k % self.n_angles,
                tr_chi: s.tr_chi,
                chi_hat_11: s.chi_hat[0][0],
                chi_hat_12: s.chi_hat[0][1],
                tr_chib: s.tr_chib,
                chib_hat_11: s.chib_hat[0][0],
                chib_hat_12: s.chib_hat[0][1],
                zeta_1: s.zeta[0],
                zeta_2: s.zeta[1],
                etab_1: s.etab[0],
                etab_2: s.etab[1],
                mu: s.mu,
            })
            .collect()
    }
}

/// Stencil `(start, weights)` for `∂_f` at slice `iv`; regular slices never reach back to the
/// vertex-offset slice, whose values carry roundoff amplified by powers of `1/ε₀`.
pub fn generator_stencil(f_nodes: &[f64], iv: usize, width: usize) -> (usize, Vec<f64>) {
    if iv == 0 {
        stencil(f_nodes, 0, width)
    } else {
        let (start, w) = stencil(&f_nodes[1..], iv - 1, width);
        (start + 1, w)
    }
}

/// Derivative `∂_f` at fixed direction of a per-node quantity (`index = iv · N + j`).
pub fn generator_derivative(grid: &ConeGrid, values: &[f64]) -> Vec<f64> {
    let n = grid.n_angles();
    let mut out = vec![0.0; values.len()];
    for iv in 0..grid.f_nodes.len() {
        let (start, w) = generator_stencil(&grid.f_nodes, iv, GENERATOR_STENCIL);
        for j in 0..n {
            out[iv * n + j] = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * values[(start + k) * n + j])
                .sum();
        }
    }
    out
}

fn require_complete(grid: &ConeGrid) -> Result<(), HorizontalError> {
    for iv in 0..grid.f_nodes.len() {
        for j in 0..grid.n_angles() {
            if grid.node(iv, j).is_none() {
                return Err(HorizontalError::MaskedNode { iv, j });
            }
        }
    }
    Ok(())
}

fn trace_free(t: &Sym2, tr: f64) -> Sym2 {
    [[t[0][0] - 0.5 * tr, t[0][1]], [t[1][0], t[1][1] - 0.5 * tr]]
}

fn sym_trace(slice: &Slice, j: usize, t: &Sym2) -> f64 {
    let m = &slice.lambda_inv[j];
    (0..2)
        .map(|a| (0..2).map(|b| m[a][b] * t[a][b]).sum::<f64>())
        .sum()
}

/// `χ`, `χ̲`, `ζ`, `η̄` from their definitions; `μ` is left at zero.
pub fn ricci_coefficients(grid: &ConeGrid) -> Result<OpticalScalars, HorizontalError> {
    require_complete(grid)?;
    let n = grid.n_angles();
    let nv = grid.f_nodes.len();
    let node = |iv: usize, j: usize| grid.node(iv, j).expect("complete grid");

    // D_L L̲ = ϑ⁻¹ ∂_f L̲ + Γ(L, L̲) along each generator.
    let mut lb_df = vec![[0.0; 4]; nv * n];
    for m in 0..4 {
        let comp: Vec<f64> = (0..nv * n).map(|k| node(k / n, k % n).lb[m]).collect();
        for (k, d) in generator_derivative(grid, &comp).into_iter().enumerate() {
            lb_df[k][m] = d;
        }
    }

    let slices: Vec<Vec<NodeScalars>> = (0..nv)
        .into_par_iter()
        .map(|iv| -> Result<Vec<NodeScalars>, HorizontalError> {
            let slice = Slice::new(grid, iv)?;
            let lbs: Vec<Vec4> = slice.nodes.iter().map(|nd| nd.lb).collect();
            let dlb = slice.vector_gradient(&lbs);
            let f = slice.f;
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                let nd = slice.nodes[j];
                let geo = &slice.geos[j];
                let x = &nd.tangents;
                let w = &nd.tangent_derivatives;
                let dlb_cov = [0, 1].map(|a| geo.covariant_along(&x[a], &nd.lb, &dlb[j][a]));
                let mut chi = [[0.0; 2]; 2];
                let mut chib = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        chi[a][b] = 0.5 * (geo.dot(&w[a], &x[b]) + geo.dot(&w[b], &x[a]));
                        chib[a][b] =
                            0.5 * (geo.dot(&dlb_cov[a], &x[b]) + geo.dot(&dlb_cov[b], &x[a]));
                    }
                }
                let tr_chi = sym_trace(&slice, j, &chi);
                let tr_chib = sym_trace(&slice, j, &chib);
                let lb_rate = axpy(
                    1.0 / nd.lapse,
                    &lb_df[iv * n + j],
                    &geo.gamma(&nd.l, &nd.lb),
                );
                let zeta_chart = [0, 1].map(|a| 0.5 * geo.dot(&w[a], &nd.lb));
                let etab_chart = [0, 1].map(|a| 0.5 * geo.dot(&x[a], &lb_rate));
                let curv = geo.curvature();
                out.push(NodeScalars {
                    tr_chi,
                    lapse_tr_chi_defect: nd.lapse * tr_chi - 2.0 / f,
                    chi_hat: trace_free(&slice.to_frame2(j, &chi), tr_chi),
                    tr_chib,
                    chib_hat: trace_free(&slice.to_frame2(j, &chib), tr_chib),
                    zeta: slice.to_frame(j, &zeta_chart),
                    etab: slice.to_frame(j, &etab_chart),
                    zeta_chart,
                    etab_chart,
                    mu: 0.0,
                    div_zeta: 0.0,
                    r4343: curv.riemann_contract(&nd.l, &nd.lb, &nd.l, &nd.lb),
                    r43: curv.ricci_contract(&nd.l, &nd.lb),
                    lb_rate,
                });
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    Ok(OpticalScalars {
        n_angles: n,
        nodes: slices.into_iter().flatten().collect(),
    })
}

fn contract(a: &Sym2, b: &Sym2) -> f64 {
    (0..2)
        .map(|i| (0..2).map(|k| a[i][k] * b[i][k]).sum::<f64>())
        .sum()
}

/// Fills `μ = ∇^a ζ_a − ½ χ̂·χ̲̂ + |ζ|² + ¼ R₄₃₄₃ − ½ R₄₃`.
pub fn mass_aspect(grid: &ConeGrid, scalars: &mut OpticalScalars) -> Result<(), HorizontalError> {
    let n = grid.n_angles();
    for iv in 0..grid.f_nodes.len() {
        let slice = Slice::new(grid, iv)?;
        let up: Vec<Chart2> = (0..n)
            .map(|j| slice.raise(j, &scalars.at(iv, j).zeta_chart))
            .collect();
        let div = slice.divergence(&up);
        for j in 0..n {
            let s = &mut scalars.nodes[iv * n + j];
            s.div_zeta = div[j];
            s.mu = div[j] - 0.5 * contract(&s.chi_hat, &s.chib_hat)
                + slice.dot(j, &s.zeta_chart, &s.zeta_chart)
                + 0.25 * s.r4343
                - 0.5 * s.r43;
        }
    }
    Ok(())
}

/// Norm of `η̄ + ζ − ∇ log ϑ` at every node.
pub fn torsion_residual(
    grid: &ConeGrid,
    scalars: &OpticalScalars,
) -> Result<Vec<f64>, HorizontalError> {
    let n = grid.n_angles();
    let mut out = Vec::with_capacity(grid.f_nodes.len() * n);
    for iv in 0..grid.f_nodes.len() {
        let slice = Slice::new(grid, iv)?;
        let log_lapse: Vec<f64> = slice.nodes.iter().map(|nd| nd.lapse.ln()).collect();
        let grad = slice.gradient(&log_lapse);
        for (j, g) in grad.iter().enumerate() {
            let s = scalars.at(iv, j);
            let r = [0, 1].map(|a| s.etab_chart[a] + s.zeta_chart[a] - g[a]);
            out.push(slice.dot(j, &r, &r).sqrt());
        }
    }
    Ok(out)
}

/// `∇̄_L trχ̲` minus the right-hand side of its transport equation, at every node.
pub fn trchib_transport_residual(
    grid: &ConeGrid,
    scalars: &OpticalScalars,
) -> Result<Vec<f64>, HorizontalError> {
    let n = grid.n_angles();
    let affine: Vec<f64> = (0..scalars.nodes.len())
        .map(|k| grid.node(k / n, k % n).map_or(f64::NAN, |nd| nd.s))
        .collect();
    // The singular part −2/s is differentiated exactly, the regular remainder by differencing.
    let regular: Vec<f64> = scalars
        .nodes
        .iter()
        .zip(&affine)
        .map(|(s, a)| s.tr_chib + 2.0 / a)
        .collect();
    let dtr = generator_derivative(grid, &regular);
    let mut out = Vec::with_capacity(regular.len());
    for iv in 0..grid.f_nodes.len() {
        let slice = Slice::new(grid, iv)?;
        let up: Vec<Chart2> = (0..n)
            .map(|j| slice.raise(j, &scalars.at(iv, j).etab_chart))
            .collect();
        let div = slice.divergence(&up);
        for j in 0..n {
            let s = scalars.at(iv, j);
            let sj = slice.nodes[j].s;
            let lhs = dtr[iv * n + j] / slice.nodes[j].lapse + 2.0 / (sj * sj);
            let rhs = 2.0 * div[j] + 2.0 * slice.dot(j, &s.etab_chart, &s.etab_chart)
                - 0.5 * s.tr_chi * s.tr_chib
                - contract(&s.chi_hat, &s.chib_hat)
                + 0.5 * s.r4343
                - s.r43;
            out.push(lhs - rhs);
        }
    }
    Ok(out)
}

/// Largest `|value|` over nodes with `f ≥ f_min`.
pub fn max_beyond(grid: &ConeGrid, values: &[f64], f_min: f64) -> f64 {
    let n = grid.n_angles();
    grid.f_nodes
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= f_min)
        .flat_map(|(iv, _)| values[iv * n..(iv + 1) * n].iter())
        .fold(0.0, |m, v| m.max(v.abs()))
}
