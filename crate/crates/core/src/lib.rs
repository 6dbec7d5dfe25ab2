//! Fractional-Laplacian Dirichlet problems on intervals and balls.
//!
//! The crate provides closed-form Green functions and their boundary traces,
//! a singular-quadrature evaluator for (-Δ)^s and its quadratic forms, a
//! Green-convolution solver for linear and semilinear Dirichlet problems,
//! and checkers that verify derivative representation formulas, the
//! Pohozaev identity for Green functions and the Robin-gradient formula.

pub mod domain;
pub mod error;
pub mod cli;
pub mod greenfn;
pub mod identities;
pub mod operator;
pub mod quad;
pub mod richardson;
pub mod solver;
pub mod specfun;

pub use domain::{BoundaryRule, Domain};
pub use error::{Error, Result};
pub use greenfn::{GreenEval, GreenFunction, TraceField, TraceMethod};
pub use identities::{CheckOptions, Identity, IdentityReport};
pub use specfun::{ConstantSet, FracParams, Regime};
