//! Stability classification of Lévy-type processes via Lyapunov drift
//! criteria, cross-checked by Monte Carlo simulation.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod classifier;
pub mod drift;
pub mod error;
pub mod extended;
pub mod geometry;
pub mod quadrature;
pub mod quadruple;
pub mod simulator;
pub mod symbol;
pub mod testfn;

pub use error::{LevyError, Result};
pub use extended::Extended;
