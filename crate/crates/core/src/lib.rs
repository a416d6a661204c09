//! Planning recommendations for a partially observed system whose actions are
//! carried out by a human who may not follow them.
//!
//! The crate is organised bottom-up:
//!
//! - [`pomdp`]: probability tables, the environment model and the joint
//!   human-AI POMDP built from an environment and a human model.
//! - [`human`]: ground-truth human behaviour (internal-state dynamics and
//!   action policy), including the lazy machine operator.
//! - [`belief`]: the factored filter over system and internal states, plus a
//!   brute-force joint filter used as a test oracle.
//! - [`ahm`]: the approximate human model (adherence state + feed-forward
//!   action predictor), its training loop and ε certification.
//! - [`solver`]: finite-horizon planners (history DP, point-based
//!   information-state DP, AHM and naive planners) and policy evaluation.
//! - [`bounds`]: the optimality-gap bound and its supporting inequality checks.
//! - [`harness`]: closed-loop simulation, dataset generation and the
//!   three-scenario machine replacement experiment.

pub mod ahm;
pub mod belief;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod human;
pub mod pomdp;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
