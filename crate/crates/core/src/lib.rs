//! Symbolic discovery, Lie-algebraic counting and numerical verification of
//! conservation laws for gradient and momentum training flows.
//!
//! The symbolic side works over exact rationals ([`ratpoly`]): architectures
//! and metrics produce polynomial vector fields ([`model`]), momentum flows
//! are lifted to phase space ([`lift`]), conservation laws are solved for as
//! the nullspace of an orthogonality system ([`solver`]) and counted
//! independently through the trace of the generated Lie algebra ([`lie`]).
//! Closed-form families and counting formulas ([`laws`]) act as oracles, and
//! [`dynamics`] checks everything numerically on discretized flows.

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod laws;
pub mod lie;
pub mod lift;
pub mod model;
pub mod ratpoly;
pub mod scenario;
pub mod solver;
pub mod witness;

pub use error::{Error, Result};
pub use exec::Exec;
