use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundle::{CouplingOps, FiberOps};
use crate::geometry::{LocalGeometry, Vec4};
use crate::profile::Profile;

use super::ParametrixError;

const BASIS: [Vec4; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// A section given by one closed-form profile per upper fiber component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectionField {
    pub components: Vec<Profile>,
}

impl SectionField {
    pub fn new(components: Vec<Profile>) -> Self {
        SectionField { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self, x: &Vec4) -> Vec<f64> {
        self.components.iter().map(|p| p.value(x)).collect()
    }
}

/// `Φ`, `D_μ Φ` and `D_μ D_ν Φ` at one point.
#[derive(Clone, Debug)]
pub struct CovariantJet {
    pub value: Vec<f64>,
    pub d: [Vec<f64>; 4],
    pub dd: [[Vec<f64>; 4]; 4],
}

fn axpy_into(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

impl CovariantJet {
    /// `X^μ D_μ Φ`.
    pub fn along(&self, x: &Vec4) -> Vec<f64> {
        let mut out = vec![0.0; self.value.len()];
        for (m, xm) in x.iter().enumerate() {
            if *xm != 0.0 {
                axpy_into(&mut out, *xm, &self.d[m]);
            }
        }
        out
    }

    /// `D²_{X,Y} Φ = X^μ Y^ν D_μ D_ν Φ`.
    pub fn hessian(&self, x: &Vec4, y: &Vec4) -> Vec<f64> {
        let mut out = vec![0.0; self.value.len()];
        for m in 0..4 {
            for n in 0..4 {
                let c = x[m] * y[n];
                if c != 0.0 {
                    axpy_into(&mut out, c, &self.dd[m][n]);
                }
            }
        }
        out
    }

    /// `□Φ = g^{μν} D_μ D_ν Φ`.
    pub fn wave(&self, geo: &LocalGeometry) -> Vec<f64> {
        let mut out = vec![0.0; self.value.len()];
        for m in 0..4 {
            for n in 0..4 {
                axpy_into(&mut out, geo.ginv[m][n], &self.dd[m][n]);
            }
        }
        out
    }
}

pub fn covariant_jet(
    fiber: &dyn FiberOps,
    field: &SectionField,
    geo: &LocalGeometry,
) -> CovariantJet {
    let jets: Vec<_> = field.components.iter().map(|p| p.jet(&geo.x)).collect();
    let value: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let partial: [Vec<f64>; 4] = [0, 1, 2, 3].map(|m| jets.iter().map(|j| j.grad[m]).collect());
    let d: [Vec<f64>; 4] = [0, 1, 2, 3].map(|n| {
        let mut v = partial[n].clone();
        axpy_into(&mut v, 1.0, &fiber.connect(geo, &BASIS[n], &value));
        v
    });
    let dd = [0, 1, 2, 3].map(|m| {
        [0, 1, 2, 3].map(|n| {
            // ∂_m (D_n Φ), then the connection on the fiber and on the form index.
            let mut v: Vec<f64> = jets.iter().map(|j| j.hess[m][n]).collect();
            axpy_into(
                &mut v,
                1.0,
                &fiber.connect_partial(geo, m, &BASIS[n], &value),
            );
            axpy_into(&mut v, 1.0, &fiber.connect(geo, &BASIS[n], &partial[m]));
            axpy_into(&mut v, 1.0, &fiber.connect(geo, &BASIS[m], &d[n]));
            for (l, dl) in d.iter().enumerate() {
                axpy_into(&mut v, -geo.christoffels.gamma[l][m][n], dl);
            }
            v
        })
    });
    CovariantJet { value, d, dd }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// `Ψ = □Φ + K^μ D_μ Φ`, exact at every point.
    Manufactured,
    Supplied {
        field: SectionField,
    },
}

/// `□Φ + K^μ D_μ Φ = Ψ` with the vertex value `J` of the kernel.
#[derive(Clone)]
pub struct WaveSystem {
    pub fiber: Arc<dyn FiberOps>,
    pub coupling: Arc<dyn CouplingOps>,
    pub field: SectionField,
    pub source: Source,
    pub seed: Vec<f64>,
}

impl WaveSystem {
    pub fn manufactured(
        fiber: Arc<dyn FiberOps>,
        coupling: Arc<dyn CouplingOps>,
        field: SectionField,
        seed: Vec<f64>,
    ) -> Result<Self, ParametrixError> {
        let sys = WaveSystem {
            fiber,
            coupling,
            field,
            source: Source::Manufactured,
            seed,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.fiber.dim()
    }

    pub fn validate(&self) -> Result<(), ParametrixError> {
        let expected = self.fiber.dim();
        let check = |what, got| {
            if got == expected {
                Ok(())
            } else {
                Err(ParametrixError::SpecMismatch {
                    what,
                    expected,
                    got,
                })
            }
        };
        check("coupling", self.coupling.dim())?;
        check("field", self.field.dim())?;
        check("seed", self.seed.len())?;
        if let Source::Supplied { field } = &self.source {
            check("source", field.dim())?;
        }
        Ok(())
    }

    pub fn jet(&self, geo: &LocalGeometry) -> CovariantJet {
        covariant_jet(self.fiber.as_ref(), &self.field, geo)
    }

    /// `K^μ D_μ Φ`.
    pub fn coupling_term(&self, geo: &LocalGeometry, jet: &CovariantJet) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if self.coupling.is_zero() {
            return out;
        }
        for m in 0..4 {
            axpy_into(
                &mut out,
                1.0,
                &self.coupling.apply(&geo.x, &geo.ginv[m], &jet.d[m]),
            );
        }
        out
    }

    pub fn source_at(&self, geo: &LocalGeometry, jet: &CovariantJet) -> Vec<f64> {
        match &self.source {
            Source::Manufactured => {
                let mut psi = jet.wave(geo);
                axpy_into(&mut psi, 1.0, &self.coupling_term(geo, jet));
                psi
            }
            Source::Supplied { field } => field.value(&geo.x),
        }
    }
}
