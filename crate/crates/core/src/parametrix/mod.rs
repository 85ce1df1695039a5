//! The representation formula on a cone: its four term groups, the alternate form of `E¹`,
//! the `ν` endomorphism, and the integration-by-parts and wave-operator identities behind it.

mod field;
mod formula;
mod identities;
mod quadrature;

#[cfg(test)]
mod tests;

use thiserror::Error;

use crate::horizontal::HorizontalError;

pub use field::{covariant_jet, CovariantJet, SectionField, Source, WaveSystem};
pub use formula::{
    evaluate_parametrix, nu_action, vertex_terms, BreakdownRow, E2Parts, ParametrixBreakdown,
    TermErrors, VertexTerms,
};
pub use identities::{box_decomposition_residual, ibp_residuals, IbpResiduals};
pub use quadrature::{cone_integral, ConeIntegral};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParametrixError {
    #[error("cone is incomplete: node ({iv}, {j}) is masked")]
    IncompleteCone { iv: usize, j: usize },
    #[error("{what} has dimension {got}, expected {expected}")]
    SpecMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("transport kernel was solved for a different vertex value")]
    SeedMismatch,
    #[error(transparent)]
    Horizontal(HorizontalError),
}

impl From<HorizontalError> for ParametrixError {
    fn from(e: HorizontalError) -> Self {
        match e {
            HorizontalError::MaskedNode { iv, j } => ParametrixError::IncompleteCone { iv, j },
            other => ParametrixError::Horizontal(other),
        }
    }
}
