//! Droplet formation in the mass-constrained Cahn-Hilliard free energy
//! `F(m) = ½∫|∇m|² + ∫(m²-1)²/4` on a periodic torus with fixed mean `n`.
//!
//! The crate pairs the closed-form phenomenology (critical constants, the
//! volume-fraction energy `Φ(η)`) with a grid minimizer, trial functions,
//! a first-order matched expansion and droplet diagnostics.

// `!(x > 0.0)` is used on purpose: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod constants;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod expansion;
pub mod field;
pub mod minimizer;
pub mod profile1d;
pub mod quadrature;
pub mod report;
pub mod sweep;
pub mod well;

pub use error::{Error, Result};
