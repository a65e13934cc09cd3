//! Quantum state identity testing at desk scale.
//!
//! Dense simulation of the Swap, Circle, Permutation and Alternation tests,
//! exact rational oracles for their EQUAL probabilities, the SRS and RCIR
//! protocols (exact and sampled), and the analytic bounds they are checked
//! against.

pub mod bounds;
pub mod error;
pub mod instances;
pub mod par;
pub mod permgroup;
pub mod protocols;
pub mod qmath;
pub mod selftest;

pub use error::{QsiError, Result};
