//! Numerical engine for Kirchhoff-type representation formulas on past null cones.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod geometry;
pub mod harness;
pub mod horizontal;
pub mod jet;
pub mod nullcone;
pub mod numerics;
pub mod parametrix;
pub mod profile;
pub mod transport;
