//! Numerical laboratory for checking when SGD is well described by a
//! stochastic differential equation.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod integrators;
pub mod linalg;
pub mod moments;
pub mod objectives;
pub mod rng;
pub mod tailindex;
pub mod weakorder;

pub use error::{Error, Result};
