//! Deep decision trees for discriminative dictionary learning over
//! adversarial multi-agent trajectories.
//!
//! The pipeline runs: synthetic or recorded [`trajectory`] data, role
//! [`alignment`] against a learned formation template, layer-wise
//! construction of a [`deeptree`] whose decision nodes cluster plays under
//! learned per-role weights and whose leaves hold goal classifiers, and the
//! downstream [`codebook`], [`strategy`] and [`simulator`] applications.

pub mod alignment;
pub mod baseline;
pub mod cli;
pub mod codebook;
pub mod deeptree;
mod error;
pub mod rng;
pub mod simulator;
pub mod strategy;
pub mod trajectory;

pub use error::{Error, Result};
