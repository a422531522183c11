//! Hybrid quantum-classical credit-default scoring, fully simulated.
//!
//! Classical rows are embedded with a Heisenberg feature map, projected to
//! per-qubit Pauli expectations, and scored by gradient-boosted trees. Those
//! scores are combined with a classical model and evaluated with the
//! weighted Gini / capture-rate composite used for default prediction.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod featuremap;
pub mod learners;
pub mod mps;
pub mod noise;
pub mod pqf;
pub mod seeds;
pub mod simulator;

pub use error::{Error, Result};
