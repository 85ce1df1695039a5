//! Integrators, quadrature and differentiation stencils shared by the cone modules.

pub mod fd;
pub mod ode;
pub mod quadrature;
pub mod spectral;
