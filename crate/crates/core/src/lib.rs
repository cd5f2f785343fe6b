//! Uniform-PAC algorithms for contextual linear bandits and episodic linear
//! MDPs, together with the baselines they are measured against.
//!
//! * [`linalg`] holds the regularized design matrix shared by every learner.
//! * [`bandit`] implements UPAC-OFUL, the OFUL baseline and bandit instances.
//! * [`mdp`] implements FLUTE, LSVI-UCB, certified linear MDPs and exact
//!   dynamic-programming evaluation.
//! * [`harness`] runs seeded experiments, computes regret and `N_eps`
//!   curves, writes CSV/JSON artifacts and audits them afterwards.

pub mod bandit;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{RegularizedDesign, Vector};
