//! LSVI-UCB baseline: one ridge design per stage over every past episode,
//! with a radius that grows with the episode count.

use super::dp::ValueTables;
use super::flute::{FluteConfig, GroupedTriples};
use super::spec::LinearMdpSpec;
use super::{EpisodeRecord, EpisodicAgent};
use crate::linalg::{RegularizedDesign, Vector};
use crate::rng::StreamRng;
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct StageFit {
    design: RegularizedDesign,
    grouped: GroupedTriples,
    samples: usize,
    weights: Vector,
}

#[derive(Debug, Clone)]
pub struct LsviUcb {
    dim: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    features: Vec<Vector>,
    config: FluteConfig,
    stages: Vec<StageFit>,
    /// `q_cache[h][s*A + a]` for the current fit.
    q_cache: Vec<Vec<f64>>,
    max_weight_norms: Vec<f64>,
    episodes: u64,
}

impl LsviUcb {
    pub fn new(
        features: Vec<Vector>,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        config: FluteConfig,
    ) -> Result<Self> {
        let dim = features.first().map_or(0, |f| f.len());
        if features.len() != num_states * num_actions || num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::invalid("feature table does not match the state/action counts"));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) || config.c_beta < 0.0 {
            return Err(Error::invalid("delta must lie in (0,1) and c_beta be nonnegative"));
        }
        let stage = StageFit {
            design: RegularizedDesign::new(dim, config.lambda)?,
            grouped: GroupedTriples::new(),
            samples: 0,
            weights: Vector::zeros(dim),
        };
        Ok(Self {
            dim,
            horizon,
            num_states,
            num_actions,
            features,
            config,
            stages: vec![stage; horizon],
            q_cache: vec![Vec::new(); horizon],
            max_weight_norms: vec![0.0; horizon],
            episodes: 0,
        })
    }

    pub fn for_spec(spec: &LinearMdpSpec, config: FluteConfig) -> Result<Self> {
        Self::new(
            spec.features().to_vec(),
            spec.num_states(),
            spec.num_actions(),
            spec.horizon(),
            config,
        )
    }

    /// `c_beta * d * H * sqrt(log(d k H / delta))` for the current episode `k`.
    pub fn radius(&self) -> f64 {
        let k = (self.episodes + 1) as f64;
        let arg = self.dim as f64 * k * self.horizon as f64 / self.config.delta;
        self.config.c_beta * (self.dim * self.horizon) as f64 * arg.ln().sqrt()
    }

    pub fn fit(&mut self) -> Result<()> {
        let beta = self.radius();
        let (ns, na) = (self.num_states, self.num_actions);
        let cap = self.horizon as f64;
        let mut next_v = vec![0.0; ns];
        for h in (0..self.horizon).rev() {
            let stage = &mut self.stages[h];
            stage.design.reset_targets();
            for (&(s, a, sp), &(count, reward_sum)) in &stage.grouped {
                let y = reward_sum + count as f64 * next_v[sp];
                stage.design.accumulate_target(&self.features[s * na + a], y)?;
            }
            stage.weights = stage.design.ridge_solve();
            self.max_weight_norms[h] = self.max_weight_norms[h].max(stage.weights.norm());
            let mut q = Vec::with_capacity(ns * na);
            for phi in &self.features {
                let bonus = beta * stage.design.elliptical_norm(phi)?;
                q.push(cap.min(stage.weights.dot(phi) + bonus));
            }
            for (s, v) in next_v.iter_mut().enumerate() {
                *v = q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            self.q_cache[h] = q;
        }
        Ok(())
    }

    /// Greedy action under the current fit; lowest index on ties.
    pub fn act(&self, h: usize, s: usize) -> usize {
        let row = &self.q_cache[h][s * self.num_actions..(s + 1) * self.num_actions];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn q_cached(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_cache[h][s * self.num_actions + a]
    }

    pub fn run_episode(&mut self, spec: &LinearMdpSpec, rng: &mut StreamRng) -> Result<EpisodeRecord> {
        self.fit()?;
        let mut record = EpisodeRecord::with_capacity(self.horizon, 1);
        let mut pending = Vec::with_capacity(self.horizon);
        let mut s = spec.initial_state();
        for h in 0..self.horizon {
            let stage_policy: Vec<usize> = (0..self.num_states).map(|st| self.act(h, st)).collect();
            let a = stage_policy[s];
            let (reward, next) = spec.sample_transition(h, s, a, rng);
            pending.push((h, s, a, next, reward));
            record.push_step(s, a, reward, 1, stage_policy);
            s = next;
        }
        for (h, s, a, next, reward) in pending {
            let phi = self.features[s * self.num_actions + a].clone();
            let stage = &mut self.stages[h];
            stage.design.rank_one_update(&phi)?;
            let entry = stage.grouped.entry((s, a, next)).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += reward;
            stage.samples += 1;
        }
        self.episodes += 1;
        Ok(record)
    }
}

impl EpisodicAgent for LsviUcb {
    fn run_episode(&mut self, spec: &LinearMdpSpec, rng: &mut StreamRng) -> Result<EpisodeRecord> {
        LsviUcb::run_episode(self, spec, rng)
    }

    fn occupancy(&self) -> Vec<Vec<usize>> {
        self.stages.iter().map(|s| vec![s.samples]).collect()
    }

    fn max_weight_norms(&self) -> Vec<Vec<f64>> {
        self.max_weight_norms.iter().map(|&n| vec![n]).collect()
    }

    fn optimism_margin(&self, optimal: &ValueTables) -> f64 {
        let mut margin = f64::INFINITY;
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    margin = margin.min(self.q_cached(h, s, a) - optimal.q[h][s][a]);
                }
            }
        }
        margin
    }
}
