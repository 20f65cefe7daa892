//! Quantum and classical 2x2 game models for two-vehicle driving
//! interactions, with a kinematic scenario simulator and a Monte Carlo
//! harness for comparing decision policies.

pub mod classical_game;
pub mod clinalg;
pub mod error;
pub mod experiments;
pub mod kv;
pub mod outcome;
pub mod quantum_game;
pub mod scenario_sim;

pub use error::{Error, Result};
