//! Numerics and exact-enumeration experiments for the symmetric binary
//! perceptron and Gaussian combinatorial discrepancy.
//!
//! * [`analytic`]: one-row and pair acceptance probabilities, critical
//!   densities, the pair free energy and its derivatives.
//! * [`shape`]: grid verification of the free-energy shape at criticality.
//! * [`second_moment`]: exact log-space evaluation of the second-moment ratio.
//! * [`cube`]: exact hypercube enumeration (discrepancy, solution counts, the
//!   row-by-row solution-set process).
//! * [`experiments`]: Monte Carlo harness with CSV/JSON persistence.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analytic;
pub mod cube;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod rng;
pub mod second_moment;
pub mod shape;
pub mod stats;

pub use error::{Error, Result};
