//! Vector bundles with compatible connection and metric, and the pairings between sections
//! and endomorphism-valued one-forms.
//!
//! Sections use contravariant (upper-index) components. A connection acts as
//! `D_μ u = ∂_μ u + ω_μ u`, and compatibility reads `∂_μ H = ω_μᵀ H + H ω_μ`.
//! Couplings are endomorphism-valued one-forms `K_μ` (first slot out, second slot in).

mod coupling;
mod ops;

pub use coupling::{BlockCoupling, Coupling, CouplingOps, CouplingSpec, EndomorphismField};
pub use ops::{DenseFiber, FiberOps, TensorSystem};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{CurvatureTensors, LocalGeometry, Mat4, SpacetimePoint, Vec4};

pub trait FiberBundle: Send + Sync {
    fn dim(&self) -> usize;
    /// Bundle metric `H`.
    fn metric(&self, geo: &LocalGeometry) -> DMatrix<f64>;
    /// Connection matrix `ω_μ`.
    fn connection(&self, geo: &LocalGeometry, mu: usize) -> DMatrix<f64>;
    /// `∂_λ ω_μ`.
    fn connection_derivative(&self, geo: &LocalGeometry, lambda: usize, mu: usize) -> DMatrix<f64>;
    /// `R_{XY}` acting on the fiber.
    fn curvature_action(
        &self,
        geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
    ) -> DMatrix<f64>;
    /// Dimensions of the direct-sum blocks, in order.
    fn block_dims(&self) -> Vec<usize> {
        vec![self.dim()]
    }
}

pub type FiberBundleSpec = Arc<dyn FiberBundle>;

#[derive(Clone, Debug, PartialEq)]
pub struct FiberElement {
    pub components: Vec<f64>,
    pub point: SpacetimePoint,
}

fn mat4_to_dense(m: &Mat4) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| m[i][j])
}

/// `Σ_k 1 ⊗ … ⊗ M ⊗ … ⊗ 1` with `M` in slot `k` of a rank-`r` tensor.
fn slotwise_sum(rank: usize, m: &Mat4) -> DMatrix<f64> {
    let n = 4usize.pow(rank as u32);
    let mut out = DMatrix::zeros(n, n);
    let dense = mat4_to_dense(m);
    for slot in 0..rank {
        let left = DMatrix::<f64>::identity(4usize.pow(slot as u32), 4usize.pow(slot as u32));
        let right = DMatrix::<f64>::identity(
            4usize.pow((rank - 1 - slot) as u32),
            4usize.pow((rank - 1 - slot) as u32),
        );
        out += left.kronecker(&dense).kronecker(&right);
    }
    out
}

fn tensor_power(rank: usize, m: &Mat4) -> DMatrix<f64> {
    let dense = mat4_to_dense(m);
    (0..rank).fold(DMatrix::identity(1, 1), |acc, _| acc.kronecker(&dense))
}

/// The bundle of rank-`r` contravariant tensors with the Levi-Civita connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorBundle {
    pub rank: usize,
}

pub fn tensor_bundle(rank: usize) -> FiberBundleSpec {
    Arc::new(TensorBundle { rank })
}

impl FiberBundle for TensorBundle {
    fn dim(&self) -> usize {
        4usize.pow(self.rank as u32)
    }

    fn metric(&self, geo: &LocalGeometry) -> DMatrix<f64> {
        tensor_power(self.rank, &geo.g)
    }

    fn connection(&self, geo: &LocalGeometry, mu: usize) -> DMatrix<f64> {
        let mut e = [0.0; 4];
        e[mu] = 1.0;
        slotwise_sum(self.rank, &geo.christoffels.along(&e))
    }

    fn connection_derivative(&self, geo: &LocalGeometry, lambda: usize, mu: usize) -> DMatrix<f64> {
        let mut m = [[0.0; 4]; 4];
        for (l, row) in m.iter_mut().enumerate() {
            for (n, entry) in row.iter_mut().enumerate() {
                *entry = geo.dgamma[lambda][l][mu][n];
            }
        }
        slotwise_sum(self.rank, &m)
    }

    fn curvature_action(
        &self,
        _geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
    ) -> DMatrix<f64> {
        slotwise_sum(self.rank, &curv.action(x, y))
    }
}

/// Block-diagonal direct sum of bundles over the same spacetime.
pub struct DirectSum {
    parts: Vec<FiberBundleSpec>,
}

pub fn direct_sum(parts: Vec<FiberBundleSpec>) -> FiberBundleSpec {
    assert!(!parts.is_empty(), "direct sum of no bundles");
    if parts.len() == 1 {
        return parts.into_iter().next().unwrap();
    }
    Arc::new(DirectSum { parts })
}

impl DirectSum {
    fn assemble(&self, block: impl Fn(&dyn FiberBundle) -> DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for p in &self.parts {
            let b = block(p.as_ref());
            let d = p.dim();
            out.view_mut((off, off), (d, d)).copy_from(&b);
            off += d;
        }
        out
    }
}

impl FiberBundle for DirectSum {
    fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.dim()).sum()
    }

    fn metric(&self, geo: &LocalGeometry) -> DMatrix<f64> {
        self.assemble(|p| p.metric(geo))
    }

    fn connection(&self, geo: &LocalGeometry, mu: usize) -> DMatrix<f64> {
        self.assemble(|p| p.connection(geo, mu))
    }

    fn connection_derivative(&self, geo: &LocalGeometry, lambda: usize, mu: usize) -> DMatrix<f64> {
        self.assemble(|p| p.connection_derivative(geo, lambda, mu))
    }

    fn curvature_action(
        &self,
        geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
    ) -> DMatrix<f64> {
        self.assemble(|p| p.curvature_action(geo, curv, x, y))
    }

    fn block_dims(&self) -> Vec<usize> {
        self.parts.iter().flat_map(|p| p.block_dims()).collect()
    }
}

/// `R_{XY}[T]` for a section value `T` at the point of `geo`.
pub fn curvature_action_commutator(
    spec: &dyn FiberBundle,
    geo: &LocalGeometry,
    x: &Vec4,
    y: &Vec4,
    t: &FiberElement,
) -> FiberElement {
    let curv = geo.curvature();
    let m = spec.curvature_action(geo, &curv, x, y);
    let v = m * DVector::from_column_slice(&t.components);
    FiberElement {
        components: v.as_slice().to_vec(),
        point: t.point,
    }
}

/// Matrix realizations of the bundle pairings.
pub mod pairings {
    use nalgebra::{DMatrix, DVector};

    /// `⟨A, B⟩ = Aᵀ H B`.
    pub fn inner(h: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(h * b))
    }

    /// `|P, T⟩`: the section `K T`.
    pub fn ket(k: &DMatrix<f64>, t: &DVector<f64>) -> DVector<f64> {
        k * t
    }

    /// `⟨T, P|`: the section `H⁻¹ Kᵀ H T`, i.e. the `H`-adjoint of `K` applied to `T`.
    pub fn bra(h: &DMatrix<f64>, t: &DVector<f64>, k: &DMatrix<f64>) -> DVector<f64> {
        let w = k.transpose() * (h * t);
        h.clone()
            .lu()
            .solve(&w)
            .expect("bundle metric is invertible")
    }

    /// `⟨A | P | T⟩ = Aᵀ H K T`.
    pub fn sandwich(h: &DMatrix<f64>, a: &DVector<f64>, k: &DMatrix<f64>, t: &DVector<f64>) -> f64 {
        inner(h, a, &(k * t))
    }

    /// `[P, Q]`: contraction of the inner slots, the endomorphism product `K_P K_Q`.
    pub fn compose(kp: &DMatrix<f64>, kq: &DMatrix<f64>) -> DMatrix<f64> {
        kp * kq
    }
}

#[cfg(test)]
mod tests;
