//! Stochastic-dynamics heuristics for box-constrained quadratic programming.
//!
//! The crate bundles four pieces:
//!
//! - [`problem`]: the BoxQP model `maximize ½ xᵀQx + Vᵀx` subject to `ℓ ≤ x ≤ u`,
//!   reproducible instance generation and the plain-text instance format.
//! - [`solvers`]: Euler–Maruyama simulations of Langevin, pumped Langevin,
//!   delay-line and measurement-feedback coherent continuous-variable machines.
//! - [`oracle`]: an exact active-set enumeration solver and a grid-search
//!   cross-check for small instances.
//! - [`bench`]: success probability, R99, time-to-solution and aggregation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use problem::{BoxQpInstance, GeneratorSpec, SolutionVector};
pub use solvers::{SolverKind, SolverParams, TrialResult};
