//! Active visual search with a POMCP planner on synthetic grid worlds.
//!
//! The crate is split by concern: [`environment`] holds the world model,
//! [`pomcp`] the generic solver, [`detection`] the simulated detector and
//! posterior filter, [`domain`] the search POMDP itself, [`docking`] the
//! final approach and [`harness`] episodes, metrics and experiment suites.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod docking;
pub mod domain;
pub mod environment;
pub mod harness;
pub mod pomcp;
