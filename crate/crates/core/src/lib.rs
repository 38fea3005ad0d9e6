//! Simulation library for Bayesian neural network inference backed by a
//! quantum inner-product oracle.
//!
//! The oracle is not simulated at the gate level. Its output follows a known
//! closed-form distribution over a `2^n` grid of estimate values, so we sample
//! that distribution directly ([`ipe`]). A small fully-connected network routes
//! every inner product of its forward and backward pass through a pluggable
//! provider ([`bnn`]), gradient-guided samplers draw posterior weight samples
//! ([`sampler`]), and the remaining modules aggregate runtime cost statistics
//! ([`cost`]) and orchestrate full experiments ([`harness`]).

pub mod bnn;
pub mod cost;
pub mod error;
pub mod harness;
pub mod ipe;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
