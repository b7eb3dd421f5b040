//! Simultaneous long-short feedback trading on a pair of directionally
//! correlated stocks.
//!
//! - [`model`]: uncertainty bounds, market realizations, controller parameters.
//! - [`analytic`]: closed-form expected gain and its stage recursion.
//! - [`rpe`]: critical uncertainty bound, the feasibility test on `K` and the region solver.
//! - [`sim`]: discrete GBM prices driving the controller with a leverage cap.
//! - [`ensemble`]: Monte Carlo over the admissible family and return statistics.
//! - [`verify`]: randomized agreement check between the feasibility test and a grid search.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod rpe;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    derive_controller, validate_uncertainty, ControllerParams, Horizon, MarketRealization, UncertaintySet,
};
