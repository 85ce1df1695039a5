//! Built-in analytic metrics. All use `t = x⁰` as time function.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GeometryError, MetricJet, SpacetimeProvider, Vec4};
use crate::jet::Jet;
use crate::profile::Profile;

const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

fn coordinate_time(x: &Vec4) -> Option<Jet> {
    Some(Jet::coordinate(0, x[0]))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Minkowski;

impl SpacetimeProvider for Minkowski {
    fn name(&self) -> &str {
        "minkowski"
    }

    fn metric_jet(&self, _x: &Vec4) -> Result<MetricJet, GeometryError> {
        let mut g = [[0.0; 4]; 4];
        for i in 0..4 {
            g[i][i] = ETA[i];
        }
        Ok(MetricJet {
            g,
            dg: [[[0.0; 4]; 4]; 4],
            ddg: [[[[0.0; 4]; 4]; 4]; 4],
        })
    }

    fn time_function(&self, x: &Vec4) -> Option<Jet> {
        coordinate_time(x)
    }
}

/// `g = Ω² η` for a positive profile Ω.
#[derive(Clone, Debug)]
pub struct ConformallyFlat {
    pub factor: Profile,
}

impl ConformallyFlat {
    pub fn linear_in_x1(slope: f64) -> Self {
        ConformallyFlat {
            factor: Profile::Polynomial {
                constant: 1.0,
                linear: [0.0, slope, 0.0, 0.0],
                quadratic: [[0.0; 4]; 4],
            },
        }
    }
}

impl SpacetimeProvider for ConformallyFlat {
    fn name(&self) -> &str {
        "conformally_flat"
    }

    fn in_domain(&self, x: &Vec4) -> bool {
        self.factor.value(x) > 0.0
    }

    fn metric_jet(&self, x: &Vec4) -> Result<MetricJet, GeometryError> {
        let omega = self.factor.jet(x);
        if omega.value <= 0.0 {
            return Err(GeometryError::DegenerateMetric { at: *x, det: 0.0 });
        }
        let o2 = omega * omega;
        let zero = Jet::constant(0.0);
        let mut comps = [[zero; 4]; 4];
        for i in 0..4 {
            comps[i][i] = o2.scale(ETA[i]);
        }
        Ok(MetricJet::from_jets(&comps))
    }

    fn time_function(&self, x: &Vec4) -> Option<Jet> {
        coordinate_time(x)
    }
}

/// Schwarzschild in Kerr–Schild form `g = η + (2M/r) k⊗k`, `k = (1, x/r)`, whose
/// time coordinate is the ingoing Eddington–Finkelstein time.
#[derive(Clone, Copy, Debug)]
pub struct Schwarzschild {
    pub mass: f64,
}

impl SpacetimeProvider for Schwarzschild {
    fn name(&self) -> &str {
        "schwarzschild"
    }

    fn in_domain(&self, x: &Vec4) -> bool {
        (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt() > 0.1 * self.mass
    }

    fn metric_jet(&self, x: &Vec4) -> Result<MetricJet, GeometryError> {
        if !self.in_domain(x) {
            return Err(GeometryError::OutsideChart(*x));
        }
        let c = Jet::coordinates(x);
        let r = (c[1] * c[1] + c[2] * c[2] + c[3] * c[3]).sqrt();
        let inv_r = r.recip();
        let h = inv_r.scale(2.0 * self.mass);
        let k = [Jet::constant(1.0), c[1] * inv_r, c[2] * inv_r, c[3] * inv_r];
        let mut comps = [[Jet::constant(0.0); 4]; 4];
        for m in 0..4 {
            for n in m..4 {
                let mut v = h * k[m] * k[n];
                if m == n {
                    v = v + ETA[m];
                }
                comps[m][n] = v;
                comps[n][m] = v;
            }
        }
        Ok(MetricJet::from_jets(&comps))
    }

    fn time_function(&self, x: &Vec4) -> Option<Jet> {
        coordinate_time(x)
    }
}

/// Configuration-level metric selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Minkowski,
    ConformallyFlat { factor: Profile },
    Schwarzschild { mass: f64 },
}

impl MetricSpec {
    pub fn build(&self) -> Arc<dyn SpacetimeProvider> {
        match self {
            MetricSpec::Minkowski => Arc::new(Minkowski),
            MetricSpec::ConformallyFlat { factor } => Arc::new(ConformallyFlat {
                factor: factor.clone(),
            }),
            MetricSpec::Schwarzschild { mass } => Arc::new(Schwarzschild { mass: *mass }),
        }
    }

    pub fn conformally_flat_linear(slope: f64) -> Self {
        MetricSpec::ConformallyFlat {
            factor: ConformallyFlat::linear_in_x1(slope).factor,
        }
    }
}
