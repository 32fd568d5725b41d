//! Fast forward-backward and primal-dual splitting methods for monotone inclusions
//! and linearly constrained convex problems, with convergence-rate diagnostics.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod ffb;
pub mod linalg;
pub mod operators;
pub mod primal_dual;

pub use error::{Error, Result};
