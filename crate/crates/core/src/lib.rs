//! Epoch-based stochastic fictitious play for n-player stochastic games with
//! turn-based controllers.
//!
//! The crate is split into:
//!
//! * [`game`]: game representation, structural validators and a seeded generator.
//! * [`response`]: expected payoffs under product beliefs and the logit
//!   (entropy-smoothed) best response.
//! * [`engine`]: the epoch/substage learning loop with belief, Q-estimate and
//!   value bookkeeping keyed by distance-from-last-substage.
//! * [`oracle`]: stage Nash-distribution solver, finite-horizon backward
//!   induction, the limiting ODE and run-vs-oracle comparison.
//! * [`harness`]: manifests, CSV/JSON outputs and batch execution used by the CLI.

pub mod engine;
pub mod error;
pub mod game;
pub mod harness;
pub mod oracle;
pub mod par;
pub mod response;
pub mod rng;

pub use error::{Error, Result};
pub use game::{ProfileSpace, StageGameStructure, StochasticGame};
pub use response::{BeliefProfile, MixedStrategy, PerturbationSpec};

/// Absolute tolerance for structural equalities on game data.
pub const STRUCTURAL_TOL: f64 = 1e-12;
