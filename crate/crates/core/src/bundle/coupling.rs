use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec4;
use crate::profile::Profile;

/// First-order coupling `P` as an endomorphism-valued one-form `K_μ(x)`.
pub trait EndomorphismField: Send + Sync {
    fn dim(&self) -> usize;
    fn matrix(&self, x: &Vec4, mu: usize) -> DMatrix<f64>;
    /// `∂_λ K_μ`.
    fn derivative(&self, x: &Vec4, lambda: usize, mu: usize) -> DMatrix<f64>;
}

/// Coupling applied to component vectors; implemented densely and blockwise.
pub trait CouplingOps: Send + Sync {
    fn dim(&self) -> usize;
    fn is_zero(&self) -> bool;
    /// `K(dir) v`.
    fn apply(&self, x: &Vec4, dir: &Vec4, v: &[f64]) -> Vec<f64>;
    /// `K(dir)ᵀ w`.
    fn apply_transpose(&self, x: &Vec4, dir: &Vec4, w: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    Zero,
    /// Explicit `K_μ` as `matrices[μ][row][col]`.
    Constant {
        matrices: Vec<Vec<Vec<f64>>>,
    },
    /// Deterministic dense pattern `scale · sin(1.3 + 0.7 i + 1.1 j + 1.9 μ + phase)`.
    Patterned {
        scale: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `profile(x) · K_μ` for a constant base coupling.
    Modulated {
        base: Box<CouplingSpec>,
        profile: Profile,
    },
}

impl CouplingSpec {
    pub fn build(&self, dim: usize) -> Result<Coupling, String> {
        let (base, modulation) = self.parts(dim)?;
        Ok(Coupling {
            dim,
            base,
            modulation,
        })
    }

    fn parts(&self, dim: usize) -> Result<([DMatrix<f64>; 4], Option<Profile>), String> {
        match self {
            CouplingSpec::Zero => Ok((std::array::from_fn(|_| DMatrix::zeros(dim, dim)), None)),
            CouplingSpec::Constant { matrices } => {
                if matrices.len() != 4 {
                    return Err(format!("coupling needs 4 matrices, got {}", matrices.len()));
                }
                let mut out: [DMatrix<f64>; 4] = std::array::from_fn(|_| DMatrix::zeros(dim, dim));
                for (mu, m) in matrices.iter().enumerate() {
                    if m.len() != dim || m.iter().any(|row| row.len() != dim) {
                        return Err(format!("coupling matrix {mu} is not {dim}×{dim}"));
                    }
                    out[mu] = DMatrix::from_fn(dim, dim, |i, j| m[i][j]);
                }
                Ok((out, None))
            }
            CouplingSpec::Patterned { scale, phase } => Ok((
                std::array::from_fn(|mu| {
                    DMatrix::from_fn(dim, dim, |i, j| {
                        scale
                            * (1.3 + 0.7 * i as f64 + 1.1 * j as f64 + 1.9 * mu as f64 + phase)
                                .sin()
                    })
                }),
                None,
            )),
            CouplingSpec::Modulated { base, profile } => {
                let (b, inner) = base.parts(dim)?;
                if inner.is_some() {
                    return Err("nested coupling modulation".into());
                }
                Ok((b, Some(profile.clone())))
            }
        }
    }
}

/// Dense coupling `K_μ(x) = m(x) C_μ` with an optional scalar modulation `m`.
#[derive(Clone, Debug)]
pub struct Coupling {
    dim: usize,
    base: [DMatrix<f64>; 4],
    modulation: Option<Profile>,
}

impl Coupling {
    pub fn zero(dim: usize) -> Self {
        CouplingSpec::Zero.build(dim).expect("zero coupling")
    }

    fn factor(&self, x: &Vec4) -> f64 {
        self.modulation.as_ref().map_or(1.0, |p| p.value(x))
    }

    pub fn along(&self, x: &Vec4, dir: &Vec4) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (mu, &d) in dir.iter().enumerate() {
            if d != 0.0 {
                m += &self.base[mu] * d;
            }
        }
        m * self.factor(x)
    }

    pub fn base(&self, mu: usize) -> &DMatrix<f64> {
        &self.base[mu]
    }

    pub fn modulation(&self) -> Option<&Profile> {
        self.modulation.as_ref()
    }
}

impl EndomorphismField for Coupling {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self, x: &Vec4, mu: usize) -> DMatrix<f64> {
        &self.base[mu] * self.factor(x)
    }

    fn derivative(&self, x: &Vec4, lambda: usize, mu: usize) -> DMatrix<f64> {
        match &self.modulation {
            None => DMatrix::zeros(self.dim, self.dim),
            Some(p) => &self.base[mu] * p.jet(x).grad[lambda],
        }
    }
}

impl CouplingOps for Coupling {
    fn dim(&self) -> usize {
        self.dim
    }

    fn is_zero(&self) -> bool {
        self.base.iter().all(|m| m.iter().all(|&c| c == 0.0))
            || self
                .modulation
                .as_ref()
                .is_some_and(Profile::is_identically_zero)
    }

    fn apply(&self, x: &Vec4, dir: &Vec4, v: &[f64]) -> Vec<f64> {
        (self.along(x, dir) * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }

    fn apply_transpose(&self, x: &Vec4, dir: &Vec4, w: &[f64]) -> Vec<f64> {
        (self.along(x, dir).transpose() * DVector::from_column_slice(w))
            .as_slice()
            .to_vec()
    }
}

/// Tensor-system view of a coupling: the blocks `P^{(mc)}` coupling field `c` into equation `m`
/// are applied one at a time.
pub struct BlockCoupling {
    blocks: Vec<Vec<[DMatrix<f64>; 4]>>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    modulation: Option<Profile>,
    zero: bool,
}

impl BlockCoupling {
    pub fn new(coupling: &Coupling, block_dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(block_dims.len());
        let mut off = 0;
        for &d in block_dims {
            offsets.push(off);
            off += d;
        }
        assert_eq!(
            off, coupling.dim,
            "block dimensions do not match the coupling"
        );
        let blocks = (0..block_dims.len())
            .map(|m| {
                (0..block_dims.len())
                    .map(|c| {
                        std::array::from_fn(|mu| {
                            coupling.base[mu]
                                .view((offsets[m], offsets[c]), (block_dims[m], block_dims[c]))
                                .into_owned()
                        })
                    })
                    .collect()
            })
            .collect();
        BlockCoupling {
            blocks,
            offsets,
            sizes: block_dims.to_vec(),
            modulation: coupling.modulation.clone(),
            zero: coupling.is_zero(),
        }
    }

    fn run(&self, x: &Vec4, dir: &Vec4, v: &[f64], transpose: bool) -> Vec<f64> {
        let factor = self.modulation.as_ref().map_or(1.0, |p| p.value(x));
        let mut out = vec![0.0; v.len()];
        for (m, row) in self.blocks.iter().enumerate() {
            for (c, block) in row.iter().enumerate() {
                // For the transpose, block (m, c) maps field m into equation c.
                let (src, dst) = if transpose { (m, c) } else { (c, m) };
                let input = &v[self.offsets[src]..self.offsets[src] + self.sizes[src]];
                for (i, o) in out[self.offsets[dst]..self.offsets[dst] + self.sizes[dst]]
                    .iter_mut()
                    .enumerate()
                {
                    let mut acc = 0.0;
                    for (j, &x_j) in input.iter().enumerate() {
                        let mut k = 0.0;
                        for mu in 0..4 {
                            let entry = if transpose {
                                block[mu][(j, i)]
                            } else {
                                block[mu][(i, j)]
                            };
                            k += entry * dir[mu];
                        }
                        acc += k * x_j;
                    }
                    *o += factor * acc;
                }
            }
        }
        out
    }
}

impl CouplingOps for BlockCoupling {
    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn is_zero(&self) -> bool {
        self.zero
    }

    fn apply(&self, x: &Vec4, dir: &Vec4, v: &[f64]) -> Vec<f64> {
        self.run(x, dir, v, false)
    }

    fn apply_transpose(&self, x: &Vec4, dir: &Vec4, w: &[f64]) -> Vec<f64> {
        self.run(x, dir, w, true)
    }
}
