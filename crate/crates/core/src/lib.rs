//! Hybrid-energy cellular network planning: coverage analysis on a Poisson
//! network, BS sleep and energy-purchase policies, a DP oracle and a spatial
//! Monte-Carlo engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod numerics;
pub mod policy;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
