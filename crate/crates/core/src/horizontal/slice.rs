use crate::bundle::FiberOps;
use crate::geometry::{LocalGeometry, Vec4};
use crate::nullcone::{ConeGrid, ConeNode, SphereGrid};
use crate::numerics::quadrature::pairwise_sum;

use super::HorizontalError;

pub type Chart2 = [f64; 2];
pub type Sym2 = [[f64; 2]; 2];

/// Calculus on one sphere `S_f` of the cone, in the `(θ, φ)` chart.
///
/// Horizontal covectors are stored by chart components `V_A = V(X_A)`, vectors by `V^A`.
pub struct Slice<'a> {
    pub iv: usize,
    pub f: f64,
    pub sphere: &'a SphereGrid,
    pub nodes: Vec<&'a ConeNode>,
    pub geos: Vec<LocalGeometry>,
    /// `λ^{AB}`.
    pub lambda_inv: Vec<Sym2>,
}

impl<'a> Slice<'a> {
    pub fn new(grid: &'a ConeGrid, iv: usize) -> Result<Self, HorizontalError> {
        let mut nodes = Vec::with_capacity(grid.n_angles());
        for j in 0..grid.n_angles() {
            nodes.push(
                grid.node(iv, j)
                    .ok_or(HorizontalError::MaskedNode { iv, j })?,
            );
        }
        let geos = nodes
            .iter()
            .map(|n| LocalGeometry::at(grid.provider.as_ref(), &n.x))
            .collect::<Result<Vec<_>, _>>()?;
        let lambda_inv = nodes
            .iter()
            .zip(&geos)
            .map(|(n, geo)| {
                let [x, y] = &n.tangents;
                let (a, b, c) = (geo.dot(x, x), geo.dot(x, y), geo.dot(y, y));
                let det = a * c - b * b;
                [[c / det, -b / det], [-b / det, a / det]]
            })
            .collect();
        Ok(Slice {
            iv,
            f: grid.f_nodes[iv],
            sphere: &grid.sphere,
            nodes,
            geos,
            lambda_inv,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_{S_f} F`.
    pub fn integral(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.sphere.chart_weights)
            .zip(&self.nodes)
            .map(|((v, w), n)| v * w * n.density)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn raise(&self, j: usize, c: &Chart2) -> Chart2 {
        let m = &self.lambda_inv[j];
        [
            m[0][0] * c[0] + m[0][1] * c[1],
            m[1][0] * c[0] + m[1][1] * c[1],
        ]
    }

    /// `λ^{AB} a_A b_B`.
    pub fn dot(&self, j: usize, a: &Chart2, b: &Chart2) -> f64 {
        let r = self.raise(j, a);
        r[0] * b[0] + r[1] * b[1]
    }

    /// `c_a^A` with `e_a = c_a^A X_A`.
    pub fn frame_coefficients(&self, j: usize) -> Sym2 {
        let n = self.nodes[j];
        let geo = &self.geos[j];
        [0, 1].map(|a| {
            self.raise(
                j,
                &[
                    geo.dot(&n.e[a], &n.tangents[0]),
                    geo.dot(&n.e[a], &n.tangents[1]),
                ],
            )
        })
    }

    /// Frame components `V_a` of a chart covector.
    pub fn to_frame(&self, j: usize, c: &Chart2) -> Chart2 {
        let k = self.frame_coefficients(j);
        [0, 1].map(|a| k[a][0] * c[0] + k[a][1] * c[1])
    }

    /// Frame components `T_ab` of a chart 2-tensor.
    pub fn to_frame2(&self, j: usize, t: &Sym2) -> Sym2 {
        let k = self.frame_coefficients(j);
        let mut out = [[0.0; 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, o) in row.iter_mut().enumerate() {
                for (p, kp) in k[a].iter().enumerate() {
                    for (q, kq) in k[b].iter().enumerate() {
                        *o += kp * kq * t[p][q];
                    }
                }
            }
        }
        out
    }

    /// Chart covector `∂_A u` of a scalar sampled on the slice.
    pub fn gradient(&self, u: &[f64]) -> Vec<Chart2> {
        let [dt, dp] = self.sphere.diff.gradient(u);
        dt.into_iter().zip(dp).map(|(a, b)| [a, b]).collect()
    }

    /// Divergence `λ^{-1/2} ∂_A(λ^{1/2} Z^A)` of a horizontal vector field.
    pub fn divergence(&self, up: &[Chart2]) -> Vec<f64> {
        let n = self.len();
        let wt: Vec<f64> = (0..n).map(|j| self.nodes[j].density * up[j][0]).collect();
        let wp: Vec<f64> = (0..n).map(|j| self.nodes[j].density * up[j][1]).collect();
        let mut dt = vec![0.0; n];
        let mut dp = vec![0.0; n];
        self.sphere.diff.d_theta(&wt, &mut dt);
        self.sphere.diff.d_phi(&wp, &mut dp);
        (0..n)
            .map(|j| (dt[j] + dp[j]) / self.nodes[j].density)
            .collect()
    }

    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let up: Vec<Chart2> = self
            .gradient(u)
            .iter()
            .enumerate()
            .map(|(j, g)| self.raise(j, g))
            .collect();
        self.divergence(&up)
    }

    /// Mixed derivative `∇̄_A u = ∂_A u + ω(X_A) u` of a fiber-valued field.
    pub fn fiber_gradient(&self, fiber: &dyn FiberOps, u: &[Vec<f64>]) -> Vec<[Vec<f64>; 2]> {
        let dim = fiber.dim();
        let mut out: Vec<[Vec<f64>; 2]> = (0..self.len())
            .map(|_| [vec![0.0; dim], vec![0.0; dim]])
            .collect();
        for i in 0..dim {
            let comp: Vec<f64> = u.iter().map(|v| v[i]).collect();
            let [dt, dp] = self.sphere.diff.gradient(&comp);
            for (j, o) in out.iter_mut().enumerate() {
                o[0][i] = dt[j];
                o[1][i] = dp[j];
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            for (a, oa) in o.iter_mut().enumerate() {
                let c = fiber.connect(&self.geos[j], &self.nodes[j].tangents[a], &u[j]);
                add_into(oa, &c);
            }
        }
        out
    }

    /// Raises the horizontal index of a fiber-valued covector.
    pub fn fiber_raise(&self, j: usize, c: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let m = &self.lambda_inv[j];
        [0, 1].map(|a| {
            c[0].iter()
                .zip(&c[1])
                .map(|(x, y)| m[a][0] * x + m[a][1] * y)
                .collect()
        })
    }

    /// Mixed divergence of a fiber-valued horizontal vector field `Z^A`.
    pub fn fiber_divergence(&self, fiber: &dyn FiberOps, up: &[[Vec<f64>; 2]]) -> Vec<Vec<f64>> {
        let dim = fiber.dim();
        let n = self.len();
        let mut out = vec![vec![0.0; dim]; n];
        let mut dt = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for i in 0..dim {
            let wt: Vec<f64> = (0..n)
                .map(|j| self.nodes[j].density * up[j][0][i])
                .collect();
            let wp: Vec<f64> = (0..n)
                .map(|j| self.nodes[j].density * up[j][1][i])
                .collect();
            self.sphere.diff.d_theta(&wt, &mut dt);
            self.sphere.diff.d_phi(&wp, &mut dp);
            for j in 0..n {
                out[j][i] = (dt[j] + dp[j]) / self.nodes[j].density;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            for a in 0..2 {
                let c = fiber.connect(&self.geos[j], &self.nodes[j].tangents[a], &up[j][a]);
                add_into(o, &c);
            }
        }
        out
    }

    /// Mixed Laplacian `λ^{AB} ∇̄_A ∇̄_B u`.
    pub fn fiber_laplacian(&self, fiber: &dyn FiberOps, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let up: Vec<[Vec<f64>; 2]> = self
            .fiber_gradient(fiber, u)
            .iter()
            .enumerate()
            .map(|(j, g)| self.fiber_raise(j, g))
            .collect();
        self.fiber_divergence(fiber, &up)
    }

    /// Chart derivatives `∂_A V` of a spacetime vector field sampled on the slice.
    pub fn vector_gradient(&self, v: &[Vec4]) -> Vec<[Vec4; 2]> {
        let mut out = vec![[[0.0; 4]; 2]; self.len()];
        for m in 0..4 {
            let comp: Vec<f64> = v.iter().map(|x| x[m]).collect();
            let [dt, dp] = self.sphere.diff.gradient(&comp);
            for (j, o) in out.iter_mut().enumerate() {
                o[0][m] = dt[j];
                o[1][m] = dp[j];
            }
        }
        out
    }
}

pub(crate) fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
