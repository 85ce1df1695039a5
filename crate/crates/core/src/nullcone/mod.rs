//! Past null cones: generators, Jacobi fields, adapted null frames and the foliation.

mod frame;
mod generator;
mod sphere;

#[cfg(test)]
mod tests;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, LocalGeometry, SpacetimePoint, SpacetimeProvider, Vec4};
use crate::numerics::ode::{integrate_to, OdeSystem, OdeTolerances};

pub use frame::{adapted_frame, frame_defect, past_reference, vertex_frame};
pub use generator::{
    GeneratorExtension, GeneratorFailure, GeneratorRun, GeneratorState, NoExtension, SeedDirection,
    GEOMETRIC_DIM,
};
pub use sphere::SphereGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("cannot build the vertex frame: {0}")]
    FrameConstructionFailure(String),
    #[error("generator {generator} escaped: {reason}")]
    GeneratorEscaped { generator: usize, reason: String },
    #[error("null frame drifted by {defect:e} at node ({iv}, {j})")]
    FrameDriftFailure { iv: usize, j: usize, defect: f64 },
    #[error("foliation degenerate: {0}")]
    FoliationDegenerate(String),
    #[error("cone sections degenerate at node ({iv}, {j}): conjugate point or caustic")]
    ConjugateDegeneration { iv: usize, j: usize },
    #[error("invalid cone configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How the cone is sliced into spheres `S_f`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foliation {
    /// `f = s`, the affine parameter.
    #[default]
    Geodesic,
    /// `f = t(p) − t`, the drop of the metric's time function.
    TimeFunction,
}

#[derive(Clone, Debug)]
pub struct ConeConfig {
    pub vertex: SpacetimePoint,
    /// Unit future timelike vector at the vertex; defaults to the normal of the time slices.
    pub observer: Option<Vec4>,
    pub foliation: Foliation,
    pub v0: f64,
    /// Smallest foliation value; defaults to `1e-6 · v0`.
    pub eps0: Option<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_v: usize,
    pub ode: OdeTolerances,
    pub frame_tolerance: f64,
}

impl ConeConfig {
    pub fn new(vertex: Vec4, v0: f64, n_theta: usize, n_phi: usize, n_v: usize) -> Self {
        ConeConfig {
            vertex: SpacetimePoint::new(vertex),
            observer: None,
            foliation: Foliation::Geodesic,
            v0,
            eps0: None,
            n_theta,
            n_phi,
            n_v,
            ode: OdeTolerances::default(),
            frame_tolerance: 1e-9,
        }
    }

    pub fn with_foliation(mut self, foliation: Foliation) -> Self {
        self.foliation = foliation;
        self
    }

    pub fn eps0(&self) -> f64 {
        self.eps0.unwrap_or(1e-6 * self.v0)
    }

    /// Foliation values of the sphere slices: `[ε₀, Δ, 2Δ, …, v₀]`.
    pub fn f_nodes(&self) -> Vec<f64> {
        let dv = self.v0 / self.n_v as f64;
        std::iter::once(self.eps0())
            .chain((1..=self.n_v).map(|i| i as f64 * dv))
            .collect()
    }

    fn validate(&self) -> Result<(), ConeError> {
        let bad = |m: &str| Err(ConeError::InvalidConfig(m.into()));
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return bad("v0 must be positive");
        }
        if self.n_v < 2 || !self.n_v.is_multiple_of(2) {
            return bad("n_v must be even and at least 2");
        }
        if self.n_theta < 2 || self.n_phi < 4 || !self.n_phi.is_multiple_of(2) {
            return bad("need n_theta ≥ 2 and even n_phi ≥ 4");
        }
        let eps0 = self.eps0();
        if !(eps0 > 0.0 && eps0 < 0.5 * self.v0 / self.n_v as f64) {
            return bad("eps0 must lie in (0, Δ/2)");
        }
        Ok(())
    }
}

/// Geometry at one cone node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeNode {
    pub x: Vec4,
    pub s: f64,
    /// `ϑ = 1 / L(f)`.
    pub lapse: f64,
    pub l: Vec4,
    pub lb: Vec4,
    pub e: [Vec4; 2],
    /// Chart tangents `X_θ`, `X_φ` of `S_f`.
    pub tangents: [Vec4; 2],
    /// `D_{X_A} L`.
    pub tangent_derivatives: [Vec4; 2],
    /// `√det λ` with `λ_AB = g(X_A, X_B)`.
    pub density: f64,
}

/// A discretized past null cone: slices `f_nodes[iv]` times sphere directions `j`.
pub struct ConeGrid {
    pub config: ConeConfig,
    pub provider: Arc<dyn SpacetimeProvider>,
    pub sphere: SphereGrid,
    pub f_nodes: Vec<f64>,
    /// Vertex value `ϑ₀` of the lapse.
    pub lapse0: f64,
    pub vertex_frame: [Vec4; 4],
    pub seeds: Vec<SeedDirection>,
    /// Per generator: why integration stopped early, if it did.
    pub failures: Vec<Option<GeneratorFailure>>,
    nodes: Vec<Option<ConeNode>>,
}

/// One row of the cone dump.
#[derive(Clone, Debug, Serialize)]
pub struct ConeRow {
    pub iv: usize,
    pub j: usize,
    pub f: f64,
    pub theta: f64,
    pub phi: f64,
    pub valid: bool,
    pub s: f64,
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub lapse: f64,
    pub density: f64,
}

impl ConeGrid {
    pub fn n_angles(&self) -> usize {
        self.sphere.len()
    }

    pub fn node(&self, iv: usize, j: usize) -> Option<&ConeNode> {
        self.nodes[iv * self.n_angles() + j].as_ref()
    }

    /// All nodes of one slice, or `None` if any generator failed before reaching it.
    pub fn slice(&self, iv: usize) -> Option<Vec<&ConeNode>> {
        (0..self.n_angles()).map(|j| self.node(iv, j)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(Option::is_some)
    }

    pub fn generator_run(&self) -> GeneratorRun<'_> {
        GeneratorRun {
            provider: self.provider.as_ref(),
            vertex: self.config.vertex.coords,
            foliation: self.config.foliation,
            lapse0: self.lapse0,
            eps0: self.config.eps0(),
            tolerances: self.config.ode,
        }
    }

    pub fn rows(&self) -> Vec<ConeRow> {
        let mut rows = Vec::with_capacity(self.nodes.len());
        for (iv, &f) in self.f_nodes.iter().enumerate() {
            for j in 0..self.n_angles() {
                let (theta, phi) = self.sphere.angles(j);
                let n = self.node(iv, j);
                let x = n.map_or([f64::NAN; 4], |n| n.x);
                rows.push(ConeRow {
                    iv,
                    j,
                    f,
                    theta,
                    phi,
                    valid: n.is_some(),
                    s: n.map_or(f64::NAN, |n| n.s),
                    x0: x[0],
                    x1: x[1],
                    x2: x[2],
                    x3: x[3],
                    lapse: n.map_or(f64::NAN, |n| n.lapse),
                    density: n.map_or(f64::NAN, |n| n.density),
                });
            }
        }
        rows
    }
}

/// Initial null directions `L₀ = −e₀ + ωᵏ e_k` for every sphere node.
pub fn seed_directions(frame: &[Vec4; 4], sphere: &SphereGrid) -> Vec<SeedDirection> {
    (0..sphere.len())
        .map(|j| {
            let [omega, d_theta, d_phi] = sphere.direction(j);
            let combine = |w: &[f64; 3], c0: f64| -> Vec4 {
                std::array::from_fn(|m| {
                    c0 * frame[0][m] + (0..3).map(|k| w[k] * frame[k + 1][m]).sum::<f64>()
                })
            };
            SeedDirection {
                omega,
                l0: combine(&omega, -1.0),
                dl0: [combine(&d_theta, 0.0), combine(&d_phi, 0.0)],
            }
        })
        .collect()
}

/// Past null geodesic from `vertex` with initial tangent `l0`, sampled at affine parameters `s_nodes`.
///
/// Returns `(x, L)` at each sample.
pub fn integrate_generator(
    provider: &dyn SpacetimeProvider,
    vertex: &Vec4,
    l0: &Vec4,
    s_nodes: &[f64],
    tolerances: &OdeTolerances,
) -> Result<Vec<(Vec4, Vec4)>, ConeError> {
    struct Geodesic<'a>(&'a dyn SpacetimeProvider);
    impl OdeSystem for Geodesic<'_> {
        fn dim(&self) -> usize {
            8
        }
        fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
            let x = [y[0], y[1], y[2], y[3]];
            if !self.0.in_domain(&x) {
                return Err(format!("left the chart at {x:?}"));
            }
            let geo = LocalGeometry::at(self.0, &x).map_err(|e| e.to_string())?;
            let u = [y[4], y[5], y[6], y[7]];
            let acc = geo.gamma(&u, &u);
            for m in 0..4 {
                dy[m] = u[m];
                dy[4 + m] = -acc[m];
            }
            Ok(())
        }
    }
    let y0: Vec<f64> = vertex.iter().chain(l0.iter()).copied().collect();
    let h = s_nodes.first().copied().unwrap_or(1.0).abs().max(1e-6);
    let states =
        integrate_to(&Geodesic(provider), 0.0, &y0, s_nodes, tolerances, h).map_err(|e| {
            ConeError::GeneratorEscaped {
                generator: 0,
                reason: e.to_string(),
            }
        })?;
    Ok(states
        .iter()
        .map(|y| ([y[0], y[1], y[2], y[3]], [y[4], y[5], y[6], y[7]]))
        .collect())
}

/// Vertex value of the lapse for every seed direction.
fn vertex_lapse(
    provider: &dyn SpacetimeProvider,
    config: &ConeConfig,
    seeds: &[SeedDirection],
) -> Result<f64, ConeError> {
    if config.foliation == Foliation::Geodesic {
        return Ok(1.0);
    }
    let t = provider
        .time_function(&config.vertex.coords)
        .ok_or_else(|| ConeError::FoliationDegenerate("metric has no time function".into()))?;
    let lapses: Vec<f64> = seeds
        .iter()
        .map(|s| -1.0 / (0..4).map(|m| t.grad[m] * s.l0[m]).sum::<f64>())
        .collect();
    let mean = lapses.iter().sum::<f64>() / lapses.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(ConeError::FoliationDegenerate(format!(
            "vertex lapse {mean}"
        )));
    }
    let spread = lapses.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max);
    if spread > 1e-10 * mean {
        return Err(ConeError::FoliationDegenerate(format!(
            "vertex lapse varies by {spread:e} across directions; the observer must be normal to the time slices"
        )));
    }
    Ok(mean)
}

fn det4(m: [Vec4; 4]) -> f64 {
    nalgebra::Matrix4::from_fn(|i, j| m[j][i]).determinant()
}

type GeneratorOutcome = Result<(Vec<ConeNode>, Option<GeneratorFailure>), ConeError>;

/// Builds the discretized past null cone of `config.vertex`.
pub fn build_cone(
    provider: Arc<dyn SpacetimeProvider>,
    config: &ConeConfig,
) -> Result<ConeGrid, ConeError> {
    config.validate()?;
    let p = config.vertex.coords;
    if !provider.in_domain(&p) {
        return Err(ConeError::Geometry(GeometryError::OutsideChart(p)));
    }
    let geo0 = LocalGeometry::at(provider.as_ref(), &p)?;
    let frame = vertex_frame(provider.as_ref(), &geo0, config.observer)?;
    let sphere = SphereGrid::new(config.n_theta, config.n_phi);
    let seeds = seed_directions(&frame, &sphere);
    let lapse0 = vertex_lapse(provider.as_ref(), config, &seeds)?;
    let f_nodes = config.f_nodes();
    let run = GeneratorRun {
        provider: provider.as_ref(),
        vertex: p,
        foliation: config.foliation,
        lapse0,
        eps0: config.eps0(),
        tolerances: config.ode,
    };

    let per_generator: Vec<GeneratorOutcome> = seeds
        .par_iter()
        .enumerate()
        .map(|(j, seed)| {
            let (states, failure) = run.integrate(seed, &NoExtension, &f_nodes);
            if let Some(GeneratorFailure::Foliation(m)) = &failure {
                return Err(ConeError::FoliationDegenerate(format!(
                    "generator {j}: {m}"
                )));
            }
            let mut nodes = Vec::with_capacity(states.len());
            let mut orientation = 0.0;
            for (iv, y) in states.iter().enumerate() {
                let node = assemble(&run, config, f_nodes[iv], y, iv, j, &mut orientation)?;
                nodes.push(node);
            }
            Ok((nodes, failure))
        })
        .collect();

    let n_ang = sphere.len();
    let mut nodes = vec![None; f_nodes.len() * n_ang];
    let mut failures = Vec::with_capacity(n_ang);
    for (j, res) in per_generator.into_iter().enumerate() {
        let (list, failure) = res?;
        for (iv, n) in list.into_iter().enumerate() {
            nodes[iv * n_ang + j] = Some(n);
        }
        failures.push(failure);
    }
    Ok(ConeGrid {
        config: config.clone(),
        provider,
        sphere,
        f_nodes,
        lapse0,
        vertex_frame: frame,
        seeds,
        failures,
        nodes,
    })
}

fn assemble(
    run: &GeneratorRun,
    config: &ConeConfig,
    f: f64,
    y: &[f64],
    iv: usize,
    j: usize,
    orientation: &mut f64,
) -> Result<ConeNode, ConeError> {
    let x = [y[0], y[1], y[2], y[3]];
    let geo = LocalGeometry::at(run.provider, &x)?;
    let state = run.state(f, y, &geo).map_err(|e| match e {
        GeneratorFailure::Foliation(m) | GeneratorFailure::Escaped(m) => {
            ConeError::FoliationDegenerate(m)
        }
    })?;
    let tangents = state.tangents();
    let tangent_derivatives = state.tangent_derivatives();
    let reference = past_reference(run.provider, &geo);
    let (lb, e) = adapted_frame(&geo, &state.l, &tangents, &reference);
    let defect = frame_defect(&geo, &state.l, &lb, &e);
    if !(defect <= 100.0 * config.frame_tolerance) {
        return Err(ConeError::FrameDriftFailure { iv, j, defect });
    }
    let l11 = geo.dot(&tangents[0], &tangents[0]);
    let l12 = geo.dot(&tangents[0], &tangents[1]);
    let l22 = geo.dot(&tangents[1], &tangents[1]);
    let det = l11 * l22 - l12 * l12;
    let vol = det4([reference, state.l, tangents[0], tangents[1]]);
    if iv == 0 {
        *orientation = vol.signum();
    }
    if !(det > 0.0) || vol.signum() != *orientation {
        return Err(ConeError::ConjugateDegeneration { iv, j });
    }
    Ok(ConeNode {
        x,
        s: state.s,
        lapse: state.lapse,
        l: state.l,
        lb,
        e,
        tangents,
        tangent_derivatives,
        density: det.sqrt(),
    })
}
