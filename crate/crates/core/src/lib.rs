//! Rank-based treatment-effect estimators.
//!
//! Regressions of normalized outcome ranks `R_i / n` on a treatment identify
//! the rank average treatment effect
//! `τ_r(F_1, F_0) = P(Y(1) >= Y(0)) - 1/2` for independent draws from the two
//! potential-outcome marginals. This crate implements the estimators for
//! randomized and confounded binary treatments, transformed treatments,
//! instrumental variables, two-period panels and sharp discontinuities,
//! together with the simulation harness used to check them against known
//! population values.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod did;
pub mod error;
pub mod io;
pub mod iv;
pub mod ols;
pub mod ranks;
pub mod rdd;
pub mod sample;
pub mod simlab;

pub use error::{Error, Result};
pub use sample::{Estimate, PanelSample, Sample};
