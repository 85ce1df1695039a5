use std::cell::RefCell;

use crate::geometry::{axpy, LocalGeometry, SpacetimeProvider, Vec4};
use crate::numerics::ode::{integrate_to, OdeSystem, OdeTolerances};

use super::Foliation;

/// Geometric state length: position, tangent, two Jacobi pairs, affine parameter.
pub const GEOMETRIC_DIM: usize = 25;

/// A past null generator together with the Jacobi fields along the two sphere directions.
#[derive(Clone, Debug)]
pub struct GeneratorState<'a> {
    pub f: f64,
    pub s: f64,
    pub x: Vec4,
    pub l: Vec4,
    /// Jacobi fields `∂_A x` at fixed affine parameter.
    pub jacobi: [Vec4; 2],
    pub jacobi_rate: [Vec4; 2],
    pub lapse: f64,
    pub time_gradient: Option<Vec4>,
    pub geo: &'a LocalGeometry,
}

impl GeneratorState<'_> {
    /// Sphere tangents at fixed foliation value.
    pub fn tangents(&self) -> [Vec4; 2] {
        match self.time_gradient {
            None => self.jacobi,
            Some(dt) => self.jacobi.map(|j| {
                let shift = self.lapse * (0..4).map(|m| dt[m] * j[m]).sum::<f64>();
                axpy(shift, &self.l, &j)
            }),
        }
    }

    /// `D_{X_A} L`.
    pub fn tangent_derivatives(&self) -> [Vec4; 2] {
        [0, 1].map(|a| {
            axpy(
                1.0,
                &self.geo.gamma(&self.jacobi[a], &self.l),
                &self.jacobi_rate[a],
            )
        })
    }

    /// `tr χ` from the Jacobi data.
    pub fn tr_chi(&self) -> f64 {
        let x = self.tangents();
        let d = self.tangent_derivatives();
        let (l11, l12, l22) = (
            self.geo.dot(&x[0], &x[0]),
            self.geo.dot(&x[0], &x[1]),
            self.geo.dot(&x[1], &x[1]),
        );
        let det = l11 * l22 - l12 * l12;
        let inv = [[l22 / det, -l12 / det], [-l12 / det, l11 / det]];
        let mut tr = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                tr += inv[a][b] * self.geo.dot(&d[a], &x[b]);
            }
        }
        tr
    }
}

/// Extra quantities integrated along each generator, such as a transport kernel.
pub trait GeneratorExtension: Sync {
    fn dim(&self) -> usize;
    /// Initial extra state at the start of the integration.
    fn seed(&self, state: &GeneratorState) -> Vec<f64>;
    /// Derivative with respect to the foliation value `f`.
    fn rhs(&self, state: &GeneratorState, y: &[f64], dy: &mut [f64]) -> Result<(), String>;
}

pub struct NoExtension;

impl GeneratorExtension for NoExtension {
    fn dim(&self) -> usize {
        0
    }

    fn seed(&self, _state: &GeneratorState) -> Vec<f64> {
        Vec::new()
    }

    fn rhs(&self, _state: &GeneratorState, _y: &[f64], _dy: &mut [f64]) -> Result<(), String> {
        Ok(())
    }
}

/// Initial null direction and its sphere derivatives at the vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedDirection {
    pub omega: [f64; 3],
    pub l0: Vec4,
    pub dl0: [Vec4; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorFailure {
    Escaped(String),
    Foliation(String),
}

/// Shared integration context for every generator of one cone.
pub struct GeneratorRun<'a> {
    pub provider: &'a dyn SpacetimeProvider,
    pub vertex: Vec4,
    pub foliation: Foliation,
    pub lapse0: f64,
    pub eps0: f64,
    pub tolerances: OdeTolerances,
}

struct System<'a, E: GeneratorExtension> {
    run: &'a GeneratorRun<'a>,
    ext: &'a E,
    failure: RefCell<Option<GeneratorFailure>>,
}

impl<E: GeneratorExtension> System<'_, E> {
    fn fail(&self, failure: GeneratorFailure) -> String {
        let msg = match &failure {
            GeneratorFailure::Escaped(m) | GeneratorFailure::Foliation(m) => m.clone(),
        };
        *self.failure.borrow_mut() = Some(failure);
        msg
    }
}

impl<E: GeneratorExtension> OdeSystem for System<'_, E> {
    fn dim(&self) -> usize {
        GEOMETRIC_DIM + self.ext.dim()
    }

    fn rhs(&self, f: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        let x = vec4(&y[0..4]);
        if !self.run.provider.in_domain(&x) {
            return Err(self.fail(GeneratorFailure::Escaped(format!(
                "left the chart at {x:?}"
            ))));
        }
        let geo = LocalGeometry::at(self.run.provider, &x)
            .map_err(|e| self.fail(GeneratorFailure::Escaped(e.to_string())))?;
        let state = self.run.state(f, y, &geo).map_err(|e| self.fail(e))?;
        let th = state.lapse;
        let l = state.l;
        let acc = geo.gamma(&l, &l);
        for m in 0..4 {
            dy[m] = th * l[m];
            dy[4 + m] = -th * acc[m];
        }
        for a in 0..2 {
            let base = 8 + 8 * a;
            let tidal = geo.dgamma_contract(&state.jacobi[a], &l, &l);
            let mix = geo.gamma(&l, &state.jacobi_rate[a]);
            for m in 0..4 {
                dy[base + m] = th * state.jacobi_rate[a][m];
                dy[base + 4 + m] = -th * (tidal[m] + 2.0 * mix[m]);
            }
        }
        dy[24] = th;
        self.ext
            .rhs(&state, &y[GEOMETRIC_DIM..], &mut dy[GEOMETRIC_DIM..])
    }
}

fn vec4(s: &[f64]) -> Vec4 {
    [s[0], s[1], s[2], s[3]]
}

impl GeneratorRun<'_> {
    /// Decodes the geometric part of an ODE state.
    pub fn state<'g>(
        &self,
        f: f64,
        y: &[f64],
        geo: &'g LocalGeometry,
    ) -> Result<GeneratorState<'g>, GeneratorFailure> {
        let x = vec4(&y[0..4]);
        let l = vec4(&y[4..8]);
        let (lapse, time_gradient) = match self.foliation {
            Foliation::Geodesic => (1.0, None),
            Foliation::TimeFunction => {
                let t = self.provider.time_function(&x).ok_or_else(|| {
                    GeneratorFailure::Foliation("metric has no time function".into())
                })?;
                let lt: f64 = (0..4).map(|m| t.grad[m] * l[m]).sum();
                let th = -1.0 / lt;
                if !(th > 0.0 && th.is_finite()) {
                    return Err(GeneratorFailure::Foliation(format!(
                        "lapse {th} at f = {f}"
                    )));
                }
                (th, Some(t.grad))
            }
        };
        Ok(GeneratorState {
            f,
            s: y[24],
            x,
            l,
            jacobi: [vec4(&y[8..12]), vec4(&y[16..20])],
            jacobi_rate: [vec4(&y[12..16]), vec4(&y[20..24])],
            lapse,
            time_gradient,
            geo,
        })
    }

    fn foliation_value(&self, x: &Vec4) -> Result<f64, GeneratorFailure> {
        let t = |p: &Vec4| {
            self.provider
                .time_function(p)
                .map(|j| j.value)
                .ok_or_else(|| GeneratorFailure::Foliation("metric has no time function".into()))
        };
        Ok(t(&self.vertex)? - t(x)?)
    }

    /// Integrates one generator and returns the states reached at `targets` (in `f`).
    ///
    /// Stops at the first failure; the returned states cover the targets reached before it.
    pub fn integrate<E: GeneratorExtension>(
        &self,
        seed: &SeedDirection,
        ext: &E,
        targets: &[f64],
    ) -> (Vec<Vec<f64>>, Option<GeneratorFailure>) {
        let geo0 = match LocalGeometry::at(self.provider, &self.vertex) {
            Ok(g) => g,
            Err(e) => return (Vec::new(), Some(GeneratorFailure::Escaped(e.to_string()))),
        };
        let s0 = match self.foliation {
            Foliation::Geodesic => self.eps0,
            Foliation::TimeFunction => 0.5 * self.lapse0 * self.eps0,
        };
        let mut y = taylor_seed(&geo0, seed, s0);
        let x_seed = vec4(&y[0..4]);
        let f_start = match self.foliation {
            Foliation::Geodesic => s0,
            Foliation::TimeFunction => match self.foliation_value(&x_seed) {
                Ok(f) => f,
                Err(e) => return (Vec::new(), Some(e)),
            },
        };
        let geo_seed = match LocalGeometry::at(self.provider, &x_seed) {
            Ok(g) => g,
            Err(e) => return (Vec::new(), Some(GeneratorFailure::Escaped(e.to_string()))),
        };
        match self.state(f_start, &y, &geo_seed) {
            Ok(state) => y.extend(ext.seed(&state)),
            Err(e) => return (Vec::new(), Some(e)),
        }
        let sys = System {
            run: self,
            ext,
            failure: RefCell::new(None),
        };
        let mut out = Vec::with_capacity(targets.len());
        let mut t = f_start;
        let mut h = (targets.first().copied().unwrap_or(f_start) - f_start)
            .abs()
            .max(1e-3 * self.eps0);
        for &target in targets {
            if target == t {
                out.push(y.clone());
                continue;
            }
            match integrate_to(&sys, t, &y, &[target], &self.tolerances, h) {
                Ok(mut states) => {
                    y = states.pop().expect("one target");
                    h = (target - t).abs();
                    t = target;
                    out.push(y.clone());
                }
                Err(e) => {
                    let failure = sys
                        .failure
                        .borrow_mut()
                        .take()
                        .unwrap_or(GeneratorFailure::Escaped(e.to_string()));
                    return (out, Some(failure));
                }
            }
        }
        (out, None)
    }
}

/// Second-order Taylor start for the generator and its Jacobi fields at affine parameter `s`.
fn taylor_seed(geo: &LocalGeometry, seed: &SeedDirection, s: f64) -> Vec<f64> {
    let l0 = seed.l0;
    let acc = geo.gamma(&l0, &l0);
    let mut y = vec![0.0; GEOMETRIC_DIM];
    for m in 0..4 {
        y[m] = geo.x[m] + s * l0[m] - 0.5 * s * s * acc[m];
        y[4 + m] = l0[m] - s * acc[m];
    }
    for a in 0..2 {
        let base = 8 + 8 * a;
        let d = seed.dl0[a];
        let mix = geo.gamma(&l0, &d);
        for m in 0..4 {
            y[base + m] = s * d[m] - s * s * mix[m];
            y[base + 4 + m] = d[m] - 2.0 * s * mix[m];
        }
    }
    y[24] = s;
    y
}
