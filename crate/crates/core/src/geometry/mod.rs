//! Metrics, Levi-Civita connection and curvature at points of a single global chart.
//!
//! Signature is (−,+,+,+). Christoffel symbols are stored as `gamma[l][m][n] = Γ^l_{mn}` and
//! Riemann as `R^r_{smn}` with the convention `[D_m, D_n]V^r = R^r_{smn} V^s`.

pub mod catalog;
mod finite_difference;

pub use catalog::{ConformallyFlat, MetricSpec, Minkowski, Schwarzschild};
pub use finite_difference::FiniteDifferenceProvider;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::Jet;

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate metric at {at:?}: |det g| = {det:e}")]
    DegenerateMetric { at: Vec4, det: f64 },
    #[error("point {0:?} lies outside the chart domain")]
    OutsideChart(Vec4),
    #[error("field is missing its derivative callback")]
    ProviderIncomplete,
    #[error("non-finite coordinates {0:?}")]
    NonFinite(Vec4),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChartId(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub coords: Vec4,
    #[serde(default)]
    pub chart: ChartId,
}

impl SpacetimePoint {
    pub fn new(coords: Vec4) -> Self {
        SpacetimePoint {
            coords,
            chart: ChartId::default(),
        }
    }
}

/// Metric components with first and second coordinate partials:
/// `dg[l][m][n] = ∂_l g_{mn}`, `ddg[k][l][m][n] = ∂_k ∂_l g_{mn}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJet {
    pub g: Mat4,
    pub dg: [Mat4; 4],
    pub ddg: [[Mat4; 4]; 4],
}

impl MetricJet {
    pub fn from_jets(components: &[[Jet; 4]; 4]) -> Self {
        let mut out = MetricJet {
            g: [[0.0; 4]; 4],
            dg: [[[0.0; 4]; 4]; 4],
            ddg: [[[[0.0; 4]; 4]; 4]; 4],
        };
        for m in 0..4 {
            for n in 0..4 {
                let c = &components[m][n];
                out.g[m][n] = c.value;
                for k in 0..4 {
                    out.dg[k][m][n] = c.grad[k];
                    for l in 0..4 {
                        out.ddg[k][l][m][n] = c.hess[k][l];
                    }
                }
            }
        }
        out
    }
}

/// An analytic Lorentzian metric on one chart. Implementations are pure functions of the point.
pub trait SpacetimeProvider: Send + Sync {
    fn name(&self) -> &str;

    fn chart(&self) -> ChartId {
        ChartId::default()
    }

    fn in_domain(&self, _x: &Vec4) -> bool {
        true
    }

    fn metric_jet(&self, x: &Vec4) -> Result<MetricJet, GeometryError>;

    /// Time function with gradient and Hessian, if the metric ships one.
    fn time_function(&self, _x: &Vec4) -> Option<Jet> {
        None
    }

    /// True for providers whose derivatives come from differencing.
    fn reduced_accuracy(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Christoffels {
    pub gamma: [Mat4; 4],
}

impl Christoffels {
    /// `Γ^l(a, b) = Γ^l_{mn} a^m b^n`.
    pub fn contract(&self, a: &Vec4, b: &Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for (l, o) in out.iter_mut().enumerate() {
            let gl = &self.gamma[l];
            let mut acc = 0.0;
            for m in 0..4 {
                if a[m] == 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for n in 0..4 {
                    row += gl[m][n] * b[n];
                }
                acc += a[m] * row;
            }
            *o = acc;
        }
        out
    }

    /// Matrix `M^l_n = Γ^l_{mn} a^m`, the connection matrix in direction `a`.
    pub fn along(&self, a: &Vec4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for l in 0..4 {
            for m in 0..4 {
                if a[m] == 0.0 {
                    continue;
                }
                for n in 0..4 {
                    out[l][n] += self.gamma[l][m][n] * a[m];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTensors {
    /// `R^r_{smn}` indexed `[r][s][m][n]`.
    pub riemann_up: [[Mat4; 4]; 4],
    /// `R_{rsmn} = g_{ra} R^a_{smn}`.
    pub riemann: [[Mat4; 4]; 4],
    /// `Ric_{sn} = R^a_{san}`.
    pub ricci: Mat4,
}

impl CurvatureTensors {
    /// `R(a, b, c, d) = R_{rsmn} a^r b^s c^m d^n`.
    pub fn riemann_contract(&self, a: &Vec4, b: &Vec4, c: &Vec4, d: &Vec4) -> f64 {
        let mut acc = 0.0;
        for r in 0..4 {
            for s in 0..4 {
                let ab = a[r] * b[s];
                if ab == 0.0 {
                    continue;
                }
                for m in 0..4 {
                    for n in 0..4 {
                        acc += ab * self.riemann[r][s][m][n] * c[m] * d[n];
                    }
                }
            }
        }
        acc
    }

    pub fn ricci_contract(&self, a: &Vec4, b: &Vec4) -> f64 {
        bilinear(&self.ricci, a, b)
    }

    /// Endomorphism `V^r ↦ R^r_{s}(X, Y) V^s`.
    pub fn action(&self, x: &Vec4, y: &Vec4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                let mut acc = 0.0;
                for m in 0..4 {
                    for n in 0..4 {
                        acc += self.riemann_up[r][s][m][n] * x[m] * y[n];
                    }
                }
                out[r][s] = acc;
            }
        }
        out
    }

    /// Largest violation of the pair antisymmetries, pair symmetry and first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let r = &self.riemann;
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        worst = worst
                            .max((r[a][b][c][d] + r[b][a][c][d]).abs())
                            .max((r[a][b][c][d] + r[a][b][d][c]).abs())
                            .max((r[a][b][c][d] - r[c][d][a][b]).abs())
                            .max((r[a][b][c][d] + r[a][c][d][b] + r[a][d][b][c]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Everything the cone machinery needs from the metric at one point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub x: Vec4,
    pub g: Mat4,
    pub ginv: Mat4,
    pub christoffels: Christoffels,
    /// `dgamma[k][l][m][n] = ∂_k Γ^l_{mn}`.
    pub dgamma: [[Mat4; 4]; 4],
}

pub fn bilinear(m: &Mat4, a: &Vec4, b: &Vec4) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        if a[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..4 {
            row += m[i][j] * b[j];
        }
        acc += a[i] * row;
    }
    acc
}

pub fn mat_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2] + m[i][3] * v[3];
    }
    out
}

pub fn axpy(a: f64, x: &Vec4, y: &Vec4) -> Vec4 {
    [
        a * x[0] + y[0],
        a * x[1] + y[1],
        a * x[2] + y[2],
        a * x[3] + y[3],
    ]
}

pub fn scaled(a: f64, x: &Vec4) -> Vec4 {
    [a * x[0], a * x[1], a * x[2], a * x[3]]
}

fn invert_metric(g: &Mat4, at: &Vec4) -> Result<Mat4, GeometryError> {
    let m = nalgebra::Matrix4::from_fn(|i, j| g[i][j]);
    let det = m.determinant();
    let scale = g.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    if !det.is_finite() || det.abs() < 1e-12 * scale.powi(4) {
        return Err(GeometryError::DegenerateMetric { at: *at, det });
    }
    let inv = m
        .try_inverse()
        .ok_or(GeometryError::DegenerateMetric { at: *at, det })?;
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
        }
    }
    Ok(out)
}

impl LocalGeometry {
    pub fn at(provider: &dyn SpacetimeProvider, x: &Vec4) -> Result<Self, GeometryError> {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite(*x));
        }
        if !provider.in_domain(x) {
            return Err(GeometryError::OutsideChart(*x));
        }
        let jet = provider.metric_jet(x)?;
        Self::from_metric_jet(x, &jet)
    }

    pub fn from_metric_jet(x: &Vec4, jet: &MetricJet) -> Result<Self, GeometryError> {
        let ginv = invert_metric(&jet.g, x)?;
        // s[a][m][n] = ∂_m g_{an} + ∂_n g_{am} − ∂_a g_{mn}
        let mut s = [[[0.0; 4]; 4]; 4];
        let mut ds = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    s[a][m][n] = jet.dg[m][a][n] + jet.dg[n][a][m] - jet.dg[a][m][n];
                    for k in 0..4 {
                        ds[k][a][m][n] =
                            jet.ddg[k][m][a][n] + jet.ddg[k][n][a][m] - jet.ddg[k][a][m][n];
                    }
                }
            }
        }
        let mut gamma = [[[0.0; 4]; 4]; 4];
        for l in 0..4 {
            for m in 0..4 {
                for n in m..4 {
                    let mut acc = 0.0;
                    for a in 0..4 {
                        acc += ginv[l][a] * s[a][m][n];
                    }
                    gamma[l][m][n] = 0.5 * acc;
                    gamma[l][n][m] = 0.5 * acc;
                }
            }
        }
        // ∂_k g^{la} = −g^{lb} ∂_k g_{bc} g^{ca}
        let mut dginv = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for l in 0..4 {
                for a in 0..4 {
                    let mut acc = 0.0;
                    for b in 0..4 {
                        for c in 0..4 {
                            acc += ginv[l][b] * jet.dg[k][b][c] * ginv[c][a];
                        }
                    }
                    dginv[k][l][a] = -acc;
                }
            }
        }
        let mut dgamma = [[[[0.0; 4]; 4]; 4]; 4];
        for k in 0..4 {
            for l in 0..4 {
                for m in 0..4 {
                    for n in m..4 {
                        let mut acc = 0.0;
                        for a in 0..4 {
                            acc += dginv[k][l][a] * s[a][m][n] + ginv[l][a] * ds[k][a][m][n];
                        }
                        dgamma[k][l][m][n] = 0.5 * acc;
                        dgamma[k][l][n][m] = 0.5 * acc;
                    }
                }
            }
        }
        Ok(LocalGeometry {
            x: *x,
            g: jet.g,
            ginv,
            christoffels: Christoffels { gamma },
            dgamma,
        })
    }

    pub fn dot(&self, a: &Vec4, b: &Vec4) -> f64 {
        bilinear(&self.g, a, b)
    }

    pub fn lower(&self, v: &Vec4) -> Vec4 {
        mat_vec(&self.g, v)
    }

    pub fn raise(&self, w: &Vec4) -> Vec4 {
        mat_vec(&self.ginv, w)
    }

    pub fn gamma(&self, a: &Vec4, b: &Vec4) -> Vec4 {
        self.christoffels.contract(a, b)
    }

    /// `(∂_c Γ^l_{mn}) c^k a^m b^n`.
    pub fn dgamma_contract(&self, c: &Vec4, a: &Vec4, b: &Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for k in 0..4 {
            if c[k] == 0.0 {
                continue;
            }
            for l in 0..4 {
                out[l] += c[k] * bilinear(&self.dgamma[k][l], a, b);
            }
        }
        out
    }

    /// Covariant derivative `D_X V = X^m ∂_m V + Γ(X, V)` given the directional partial `X^m ∂_m V`.
    pub fn covariant_along(&self, x: &Vec4, v: &Vec4, directional_partial: &Vec4) -> Vec4 {
        let c = self.gamma(x, v);
        [
            directional_partial[0] + c[0],
            directional_partial[1] + c[1],
            directional_partial[2] + c[2],
            directional_partial[3] + c[3],
        ]
    }

    pub fn curvature(&self) -> CurvatureTensors {
        let gam = &self.christoffels.gamma;
        let dg = &self.dgamma;
        let mut up = [[[[0.0; 4]; 4]; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                for m in 0..4 {
                    for n in (m + 1)..4 {
                        let mut acc = dg[m][r][n][s] - dg[n][r][m][s];
                        for l in 0..4 {
                            acc += gam[r][m][l] * gam[l][n][s] - gam[r][n][l] * gam[l][m][s];
                        }
                        up[r][s][m][n] = acc;
                        up[r][s][n][m] = -acc;
                    }
                }
            }
        }
        let mut down = [[[[0.0; 4]; 4]; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                for m in 0..4 {
                    for n in 0..4 {
                        let mut acc = 0.0;
                        for a in 0..4 {
                            acc += self.g[r][a] * up[a][s][m][n];
                        }
                        down[r][s][m][n] = acc;
                    }
                }
            }
        }
        let mut ricci = [[0.0; 4]; 4];
        for s in 0..4 {
            for n in 0..4 {
                let mut acc = 0.0;
                for a in 0..4 {
                    acc += up[a][s][a][n];
                }
                ricci[s][n] = acc;
            }
        }
        CurvatureTensors {
            riemann_up: up,
            riemann: down,
            ricci,
        }
    }
}

pub fn christoffels(
    provider: &dyn SpacetimeProvider,
    x: &SpacetimePoint,
) -> Result<Christoffels, GeometryError> {
    Ok(LocalGeometry::at(provider, &x.coords)?.christoffels)
}

pub fn riemann(
    provider: &dyn SpacetimeProvider,
    x: &SpacetimePoint,
) -> Result<CurvatureTensors, GeometryError> {
    Ok(LocalGeometry::at(provider, &x.coords)?.curvature())
}

/// A covariant tensor field of fixed rank with coordinate partials.
///
/// Components are flattened with the first index most significant.
pub trait SpacetimeField {
    fn rank(&self) -> usize;
    fn value(&self, x: &Vec4) -> Vec<f64>;
    /// `partials[m]` holds `∂_m` of every component, or `None` when unavailable.
    fn partials(&self, x: &Vec4) -> Option<[Vec<f64>; 4]>;
}

/// `D_m T_{I}` for a covariant field, flattened as `out[m * 4^r + I]`.
pub fn covariant_derivative(
    provider: &dyn SpacetimeProvider,
    field: &dyn SpacetimeField,
    x: &SpacetimePoint,
) -> Result<Vec<f64>, GeometryError> {
    let r = field.rank();
    let geo = LocalGeometry::at(provider, &x.coords)?;
    let value = field.value(&x.coords);
    let partials = field
        .partials(&x.coords)
        .ok_or(GeometryError::ProviderIncomplete)?;
    let n = 4usize.pow(r as u32);
    let mut out = vec![0.0; 4 * n];
    for m in 0..4 {
        for idx in 0..n {
            let mut acc = partials[m][idx];
            for slot in 0..r {
                let stride = 4usize.pow((r - 1 - slot) as u32);
                let i_k = (idx / stride) % 4;
                let base = idx - i_k * stride;
                for l in 0..4 {
                    acc -= geo.christoffels.gamma[l][m][i_k] * value[base + l * stride];
                }
            }
            out[m * n + idx] = acc;
        }
    }
    Ok(out)
}
