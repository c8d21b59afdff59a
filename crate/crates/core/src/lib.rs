//! Positive, negative and sign-changing solutions of `−Δu = f(u)` with zero
//! Dirichlet data on the unit interval or square.
//!
//! The solver discretizes the energy `I(u) = ½∫|∇u|² − ∫F(u)` and runs
//! descending flows of `u − A(u)`, `A = (−Δ)⁻¹ f`, kept inside the positive
//! and negative cones (mountain-pass paths) or forced outside their
//! neighborhoods (a deformed half-disk whose boundary stays pinned).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cones;
pub mod energy;
pub mod error;
pub mod exec;
pub mod flow;
pub mod grid;
pub mod minimax;
pub mod sampling;

pub use error::{Error, Result};
