use nalgebra::{DMatrix, DVector};

use super::FiberBundleSpec;
use crate::geometry::{CurvatureTensors, LocalGeometry, Mat4, Vec4};

/// Fiber algebra at a point, applied to component vectors.
///
/// Both the generic bundle path ([`DenseFiber`]) and the blockwise tensor path
/// ([`TensorSystem`]) implement this, so every downstream computation runs unchanged on either.
pub trait FiberOps: Send + Sync {
    fn dim(&self) -> usize;
    fn block_dims(&self) -> Vec<usize>;
    /// `H v`.
    fn lower(&self, geo: &LocalGeometry, v: &[f64]) -> Vec<f64>;
    /// `H⁻¹ w`.
    fn raise(&self, geo: &LocalGeometry, w: &[f64]) -> Vec<f64>;
    /// `ω(dir) v`.
    fn connect(&self, geo: &LocalGeometry, dir: &Vec4, v: &[f64]) -> Vec<f64>;
    /// `(∂_λ ω_μ) dir^μ v`.
    fn connect_partial(
        &self,
        geo: &LocalGeometry,
        lambda: usize,
        dir: &Vec4,
        v: &[f64],
    ) -> Vec<f64>;
    /// `R_{XY} v`.
    fn curvature(
        &self,
        geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
        v: &[f64],
    ) -> Vec<f64>;

    fn inner(&self, geo: &LocalGeometry, a: &[f64], b: &[f64]) -> f64 {
        let hb = self.lower(geo, b);
        a.iter().zip(&hb).map(|(x, y)| x * y).sum()
    }
}

/// Generic bundle path: assembles the dense matrices of a [`FiberBundleSpec`].
pub struct DenseFiber {
    pub bundle: FiberBundleSpec,
}

impl DenseFiber {
    pub fn new(bundle: FiberBundleSpec) -> Self {
        DenseFiber { bundle }
    }
}

fn mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

impl FiberOps for DenseFiber {
    fn dim(&self) -> usize {
        self.bundle.dim()
    }

    fn block_dims(&self) -> Vec<usize> {
        self.bundle.block_dims()
    }

    fn lower(&self, geo: &LocalGeometry, v: &[f64]) -> Vec<f64> {
        mul(&self.bundle.metric(geo), v)
    }

    fn raise(&self, geo: &LocalGeometry, w: &[f64]) -> Vec<f64> {
        let h = self.bundle.metric(geo);
        h.lu()
            .solve(&DVector::from_column_slice(w))
            .expect("bundle metric is invertible")
            .as_slice()
            .to_vec()
    }

    fn connect(&self, geo: &LocalGeometry, dir: &Vec4, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (mu, &d) in dir.iter().enumerate() {
            if d != 0.0 {
                m += self.bundle.connection(geo, mu) * d;
            }
        }
        mul(&m, v)
    }

    fn connect_partial(
        &self,
        geo: &LocalGeometry,
        lambda: usize,
        dir: &Vec4,
        v: &[f64],
    ) -> Vec<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (mu, &d) in dir.iter().enumerate() {
            if d != 0.0 {
                m += self.bundle.connection_derivative(geo, lambda, mu) * d;
            }
        }
        mul(&m, v)
    }

    fn curvature(
        &self,
        geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
        v: &[f64],
    ) -> Vec<f64> {
        mul(&self.bundle.curvature_action(geo, curv, x, y), v)
    }
}

/// Tensor-system path: a list of contravariant tensor fields of the given ranks, each acted on
/// slot by slot without assembling any matrix larger than 4×4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSystem {
    pub ranks: Vec<usize>,
}

impl TensorSystem {
    pub fn new(ranks: Vec<usize>) -> Self {
        TensorSystem { ranks }
    }

    /// Applies `Σ_slots M` (when `sum`) or `⊗_slots M` (otherwise) blockwise.
    fn apply(&self, m: &Mat4, v: &[f64], sum: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let mut off = 0;
        for &r in &self.ranks {
            let n = 4usize.pow(r as u32);
            let block = &v[off..off + n];
            let res = if sum {
                slot_sum(r, m, block)
            } else {
                slot_product(r, m, block)
            };
            out[off..off + n].copy_from_slice(&res);
            off += n;
        }
        out
    }
}

fn apply_in_slot(rank: usize, slot: usize, m: &Mat4, v: &[f64]) -> Vec<f64> {
    let stride = 4usize.pow((rank - 1 - slot) as u32);
    let mut out = vec![0.0; v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = (idx / stride) % 4;
        let base = idx - i * stride;
        let mut acc = 0.0;
        for j in 0..4 {
            acc += m[i][j] * v[base + j * stride];
        }
        *o = acc;
    }
    out
}

fn slot_sum(rank: usize, m: &Mat4, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for slot in 0..rank {
        for (o, x) in out.iter_mut().zip(apply_in_slot(rank, slot, m, v)) {
            *o += x;
        }
    }
    out
}

fn slot_product(rank: usize, m: &Mat4, v: &[f64]) -> Vec<f64> {
    (0..rank).fold(v.to_vec(), |acc, slot| apply_in_slot(rank, slot, m, &acc))
}

impl FiberOps for TensorSystem {
    fn dim(&self) -> usize {
        self.ranks.iter().map(|&r| 4usize.pow(r as u32)).sum()
    }

    fn block_dims(&self) -> Vec<usize> {
        self.ranks.iter().map(|&r| 4usize.pow(r as u32)).collect()
    }

    fn lower(&self, geo: &LocalGeometry, v: &[f64]) -> Vec<f64> {
        self.apply(&geo.g, v, false)
    }

    fn raise(&self, geo: &LocalGeometry, w: &[f64]) -> Vec<f64> {
        self.apply(&geo.ginv, w, false)
    }

    fn connect(&self, geo: &LocalGeometry, dir: &Vec4, v: &[f64]) -> Vec<f64> {
        self.apply(&geo.christoffels.along(dir), v, true)
    }

    fn connect_partial(
        &self,
        geo: &LocalGeometry,
        lambda: usize,
        dir: &Vec4,
        v: &[f64],
    ) -> Vec<f64> {
        let mut m = [[0.0; 4]; 4];
        for (l, row) in m.iter_mut().enumerate() {
            for (n, entry) in row.iter_mut().enumerate() {
                *entry = (0..4)
                    .map(|mu| geo.dgamma[lambda][l][mu][n] * dir[mu])
                    .sum();
            }
        }
        self.apply(&m, v, true)
    }

    fn curvature(
        &self,
        _geo: &LocalGeometry,
        curv: &CurvatureTensors,
        x: &Vec4,
        y: &Vec4,
        v: &[f64],
    ) -> Vec<f64> {
        self.apply(&curv.action(x, y), v, true)
    }
}
