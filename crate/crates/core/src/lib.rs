//! Contextual bandits with graph feedback: EXP3-style agents that learn from
//! side observations, an adversarial simulator, regret evaluation and exact
//! small-scale verification oracles.

pub mod algorithms;
pub mod config;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod graph;
pub mod rng;
pub mod simulator;
pub mod verification;

pub use error::{Error, Result};
