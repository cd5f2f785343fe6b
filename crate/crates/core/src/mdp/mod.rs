//! Episodic linear MDPs: certified environments, exact evaluation, FLUTE
//! and the LSVI-UCB baseline.

pub mod dp;
pub mod flute;
pub mod lsvi;
pub mod spec;

pub use dp::{evaluate_policy, exact_optimal_values, greedy_policy, Policy, ValueTables};
pub use flute::{beta_flute, stage_level_capacity, weight_norm_bound, FluteAgent, FluteConfig, THEORY_C_BETA};
pub use lsvi::LsviUcb;
pub use spec::{CheckResult, LinearMdpFile, LinearMdpSpec};

use crate::rng::StreamRng;
use crate::Result;

/// One stored `(s, a, s')` observation with its reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub episode: u64,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub reward: f64,
}

/// What happened in one episode, plus the stage-wise policy to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Level each stage's triple was filed at.
    pub levels: Vec<usize>,
    /// `policy[h][s]`: the action rule in force at stage `h` this episode.
    pub policy: Policy,
    pub total_return: f64,
    /// `S_k` when the episode started.
    pub total_level: usize,
}

impl EpisodeRecord {
    pub(crate) fn with_capacity(horizon: usize, total_level: usize) -> Self {
        Self {
            states: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            levels: Vec::with_capacity(horizon),
            policy: Vec::with_capacity(horizon),
            total_return: 0.0,
            total_level,
        }
    }

    pub(crate) fn push_step(&mut self, s: usize, a: usize, reward: f64, level: usize, stage_policy: Vec<usize>) {
        self.states.push(s);
        self.actions.push(a);
        self.rewards.push(reward);
        self.levels.push(level);
        self.policy.push(stage_policy);
        self.total_return += reward;
    }
}

/// What the harness needs from an episodic learner.
pub trait EpisodicAgent {
    fn run_episode(&mut self, spec: &LinearMdpSpec, rng: &mut StreamRng) -> Result<EpisodeRecord>;

    /// `occupancy[h][l-1] = |C_h^l|`.
    fn occupancy(&self) -> Vec<Vec<usize>>;

    /// Largest `||w_h^l||` seen in any fit, indexed like [`Self::occupancy`].
    fn max_weight_norms(&self) -> Vec<Vec<f64>>;

    /// Smallest `Q_h^l - Q*_h` over the most recent fit.
    fn optimism_margin(&self, optimal: &ValueTables) -> f64;
}
