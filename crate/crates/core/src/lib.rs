//! Leading-order splitting of separatrices under rapidly oscillating
//! perturbations of `x'' = f(x)`, by stationary phase, with brute-force
//! quadrature and invariant-manifold oracles to check it against.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod config;
pub mod dynsys;
pub mod error;
pub mod expr;
pub mod fourier;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod roots;
pub mod stphase;

pub use error::{Error, Result};
