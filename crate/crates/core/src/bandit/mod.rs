//! Contextual linear bandits: instances, UPAC-OFUL and the OFUL baseline.

pub mod instance;
pub mod oful;
pub mod upac;

pub use instance::{BanditInstance, DecisionSource, NoiseModel};
pub use oful::{Oful, OfulConfig, TieBreak};
pub use upac::{beta_bandit, level_capacity, LevelAssignment, UpacOful};

use crate::linalg::Vector;
use crate::Result;

/// What the harness needs from a bandit learner.
pub trait BanditAgent {
    /// Index into `decision_set` of the action to play in round `k`.
    fn select(&mut self, k: u64, decision_set: &[Vector]) -> Result<usize>;

    /// Records the outcome of round `k`; returns the level the round was
    /// filed at (always 1 for single-design learners).
    fn observe(&mut self, k: u64, x: &Vector, reward: f64) -> Result<usize>;

    /// Per-level sample counts.
    fn occupancy(&self) -> Vec<usize>;
}

impl BanditAgent for UpacOful {
    fn select(&mut self, _k: u64, decision_set: &[Vector]) -> Result<usize> {
        self.select_action(decision_set)
    }

    fn observe(&mut self, _k: u64, x: &Vector, reward: f64) -> Result<usize> {
        let assignment = self.assign_level(x)?;
        self.observe_reward(x, reward, assignment.level)?;
        Ok(assignment.level)
    }

    fn occupancy(&self) -> Vec<usize> {
        UpacOful::occupancy(self)
    }
}

impl BanditAgent for Oful {
    fn select(&mut self, k: u64, decision_set: &[Vector]) -> Result<usize> {
        self.select_action(k, decision_set)
    }

    fn observe(&mut self, _k: u64, x: &Vector, reward: f64) -> Result<usize> {
        self.observe_reward(x, reward)?;
        Ok(1)
    }

    fn occupancy(&self) -> Vec<usize> {
        vec![self.rounds() as usize]
    }
}
