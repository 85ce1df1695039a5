use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundle::{
    direct_sum, tensor_bundle, BlockCoupling, Coupling, CouplingOps, CouplingSpec, DenseFiber,
    FiberOps, TensorSystem,
};
use crate::geometry::{MetricSpec, Vec4};
use crate::nullcone::{ConeConfig, Foliation};
use crate::parametrix::{SectionField, Source, WaveSystem};

use super::{Claim, HarnessError, Metric};

/// Apex, height and slicing of the cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub vertex: Vec4,
    pub v0: f64,
    #[serde(default)]
    pub foliation: Foliation,
}

/// Which fiber algebra carries the computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberPath {
    /// Blockwise tensor system with the coupling split into blocks.
    #[default]
    Tensor,
    /// Dense direct-sum bundle with the full coupling matrices.
    Bundle,
}

/// The wave system: tensor ranks of the unknowns, manufactured field, coupling and kernel seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub path: FiberPath,
    pub field: SectionField,
    #[serde(default = "manufactured")]
    pub source: Source,
    pub coupling: CouplingSpec,
    pub seed: Vec<f64>,
    /// Second section for the integration-by-parts identities; the field itself when absent.
    #[serde(default)]
    pub companion: Option<SectionField>,
}

fn manufactured() -> Source {
    Source::Manufactured
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_v: usize,
    #[serde(default)]
    pub eps0: Option<f64>,
}

impl Rung {
    pub const fn new(n_theta: usize, n_phi: usize, n_v: usize) -> Self {
        Rung {
            n_theta,
            n_phi,
            n_v,
            eps0: None,
        }
    }
}

/// The reference ladder (8×16, 16×32, 32×64) × N_v ∈ (64, 128, 256).
pub fn reference_ladder() -> Vec<Rung> {
    vec![
        Rung::new(8, 16, 64),
        Rung::new(16, 32, 128),
        Rung::new(32, 64, 256),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub name: String,
    pub metric: MetricSpec,
    pub cone: ConeSpec,
    pub system: SystemSpec,
    #[serde(default = "reference_ladder")]
    pub ladder: Vec<Rung>,
    #[serde(default)]
    pub claims: Vec<Claim>,
}

impl TestCase {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| {
            Err(HarnessError::InvalidCase {
                case: self.name.clone(),
                reason: m,
            })
        };
        if self.name.is_empty() {
            return bad("empty case name".into());
        }
        if self.ladder.is_empty() {
            return bad("empty grid ladder".into());
        }
        for w in self.ladder.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b.n_v > a.n_v && b.n_theta >= a.n_theta && b.n_phi >= a.n_phi) {
                return bad(format!("ladder is not strictly refining at {a:?} -> {b:?}"));
            }
        }
        if !(self.cone.v0 > 0.0 && self.cone.v0.is_finite()) {
            return bad("v0 must be positive".into());
        }
        let dim = self.dim();
        let s = &self.system;
        for (what, got) in [("field", s.field.dim()), ("seed", s.seed.len())] {
            if got != dim {
                return bad(format!(
                    "{what} has dimension {got}, the ranks {:?} need {dim}",
                    s.ranks
                ));
            }
        }
        if let Some(c) = &s.companion {
            if c.dim() != dim {
                return bad(format!(
                    "companion has dimension {}, expected {dim}",
                    c.dim()
                ));
            }
        }
        if let Source::Supplied { field } = &s.source {
            if field.dim() != dim {
                return bad(format!(
                    "source has dimension {}, expected {dim}",
                    field.dim()
                ));
            }
        }
        s.coupling
            .build(dim)
            .map_err(|reason| HarnessError::InvalidCase {
                case: self.name.clone(),
                reason,
            })?;
        for claim in &self.claims {
            if !(claim.threshold() > 0.0 && claim.threshold().is_finite()) {
                return bad(format!("threshold of {claim:?} must be positive"));
            }
            match claim {
                Claim::Order { .. } if self.ladder.len() < 3 => {
                    return bad("order claims need at least three rungs".into());
                }
                Claim::Bound { rungs: Some(r), .. }
                    if r.iter().any(|&i| i >= self.ladder.len()) =>
                {
                    return bad(format!("{claim:?} names a rung beyond the ladder"));
                }
                _ => {}
            }
            if claim.metric() == Metric::KernelOracle && !self.has_exponential_kernel() {
                return bad("the kernel oracle needs Minkowski, the geodesic foliation and a constant coupling".into());
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.system
            .ranks
            .iter()
            .map(|&r| 4usize.pow(r as u32))
            .sum()
    }

    /// `B = exp(½ f K(L)†) J` holds exactly along every generator.
    pub fn has_exponential_kernel(&self) -> bool {
        matches!(self.metric, MetricSpec::Minkowski)
            && self.cone.foliation == Foliation::Geodesic
            && matches!(
                self.system.coupling,
                CouplingSpec::Zero | CouplingSpec::Constant { .. } | CouplingSpec::Patterned { .. }
            )
    }

    pub fn cone_config(&self, rung: &Rung) -> ConeConfig {
        let mut cfg = ConeConfig::new(
            self.cone.vertex,
            self.cone.v0,
            rung.n_theta,
            rung.n_phi,
            rung.n_v,
        )
        .with_foliation(self.cone.foliation);
        cfg.eps0 = rung.eps0;
        cfg
    }

    fn coupling(&self) -> Result<Coupling, HarnessError> {
        self.system
            .coupling
            .build(self.dim())
            .map_err(|reason| HarnessError::InvalidCase {
                case: self.name.clone(),
                reason,
            })
    }

    /// The wave system along `path`.
    pub fn wave_system(&self, path: FiberPath) -> Result<WaveSystem, HarnessError> {
        let coupling = self.coupling()?;
        let ranks = &self.system.ranks;
        let (fiber, coupling): (Arc<dyn FiberOps>, Arc<dyn CouplingOps>) = match path {
            FiberPath::Tensor => {
                let tensor = TensorSystem::new(ranks.clone());
                let blocks = BlockCoupling::new(&coupling, &tensor.block_dims());
                (Arc::new(tensor), Arc::new(blocks))
            }
            FiberPath::Bundle => {
                let bundle = direct_sum(ranks.iter().map(|&r| tensor_bundle(r)).collect());
                (Arc::new(DenseFiber::new(bundle)), Arc::new(coupling))
            }
        };
        let sys = WaveSystem {
            fiber,
            coupling,
            field: self.system.field.clone(),
            source: self.system.source.clone(),
            seed: self.system.seed.clone(),
        };
        sys.validate()?;
        Ok(sys)
    }
}
