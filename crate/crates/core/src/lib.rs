//! Simulator and analytic evaluation toolkit for two-layer (hierarchical)
//! entanglement access control across many quantum LANs.
//!
//! The outer layer picks a uniformly random set of `K` winning QLANs, the
//! inner layer picks `k_i` winning nodes inside each winner. This crate
//! provides the deterministic core logic ([`partition`]), Monte-Carlo
//! execution of protocol rounds ([`lottery`]), closed-form success/latency
//! models ([`analytics`], [`baselines`]) and a sparse-amplitude model of the
//! embedded winner/quota state ([`qverify`]).
//!
//! QLAN and node indices are 0-based throughout.

pub mod analytics;
pub mod baselines;
mod error;
pub mod lottery;
pub mod netgen;
pub mod partition;
pub mod qverify;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
