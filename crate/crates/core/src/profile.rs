//! Closed-form scalar profiles in chart coordinates.
//!
//! Profiles build conformal factors, manufactured field components and coupling modulations.
//! Each evaluates to a [`Jet`], so first and second partials are exact.

use serde::{Deserialize, Serialize};

use crate::jet::Jet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `constant + linear·x + xᵀ quadratic x`.
    Polynomial {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        linear: [f64; 4],
        #[serde(default)]
        quadratic: [[f64; 4]; 4],
    },
    /// `amplitude · sin(wave·x + phase) · exp(−decay |x − center|²)` with the Euclidean chart norm.
    DampedTrig {
        amplitude: f64,
        wave: [f64; 4],
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        decay: f64,
        #[serde(default)]
        center: [f64; 4],
    },
    Sum {
        terms: Vec<Profile>,
    },
}

impl Profile {
    pub fn zero() -> Self {
        Profile::Constant { value: 0.0 }
    }

    pub fn jet(&self, x: &[f64; 4]) -> Jet {
        self.jet_of(&Jet::coordinates(x))
    }

    pub fn value(&self, x: &[f64; 4]) -> f64 {
        self.jet(x).value
    }

    pub fn jet_of(&self, x: &[Jet; 4]) -> Jet {
        match self {
            Profile::Constant { value } => Jet::constant(*value),
            Profile::Polynomial {
                constant,
                linear,
                quadratic,
            } => {
                let mut acc = Jet::constant(*constant);
                for m in 0..4 {
                    if linear[m] != 0.0 {
                        acc = acc + x[m] * linear[m];
                    }
                    for n in 0..4 {
                        if quadratic[m][n] != 0.0 {
                            acc = acc + x[m] * x[n] * quadratic[m][n];
                        }
                    }
                }
                acc
            }
            Profile::DampedTrig {
                amplitude,
                wave,
                phase,
                decay,
                center,
            } => {
                let mut arg = Jet::constant(*phase);
                for m in 0..4 {
                    arg = arg + x[m] * wave[m];
                }
                let osc = arg.sin() * *amplitude;
                if *decay == 0.0 {
                    return osc;
                }
                let mut r2 = Jet::constant(0.0);
                for m in 0..4 {
                    let d = x[m] - center[m];
                    r2 = r2 + d * d;
                }
                osc * (r2 * (-*decay)).exp()
            }
            Profile::Sum { terms } => terms
                .iter()
                .fold(Jet::constant(0.0), |acc, t| acc + t.jet_of(x)),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == 0.0,
            Profile::Polynomial {
                constant,
                linear,
                quadratic,
            } => {
                *constant == 0.0
                    && linear.iter().all(|&c| c == 0.0)
                    && quadratic.iter().flatten().all(|&c| c == 0.0)
            }
            Profile::DampedTrig { amplitude, .. } => *amplitude == 0.0,
            Profile::Sum { terms } => terms.iter().all(Profile::is_identically_zero),
        }
    }
}
