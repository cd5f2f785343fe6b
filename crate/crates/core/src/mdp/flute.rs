//! FLUTE: least-squares value iteration over a per-stage multi-level
//! partition of past transitions.
//!
//! At the start of each episode every `(stage, level)` pair refits a ridge
//! regression of `r + V^l_{h+1}(s')` on `phi(s,a)` using only the triples it
//! owns. `Q^l_h` adds a level-specific bonus and is clipped at `H`, and
//! `V^l_h(s) = max_a min_{i <= l} Q^i_h(s,a)`. During the rollout the level
//! chain `l_0 = S_k + 1 >= l_1 >= ... >= l_H` caps both the action rule and
//! where each new triple is filed.

use std::collections::BTreeMap;

use rand::Rng;

use super::dp::ValueTables;
use super::spec::LinearMdpSpec;
use super::{EpisodeRecord, EpisodicAgent, Transition};
use crate::linalg::{RegularizedDesign, Vector};
use crate::{Error, Result};

/// Radius constant used when optimism must hold with high probability.
pub const THEORY_C_BETA: f64 = 16.0;

/// `c_beta * d * H * l * sqrt(log(d l H / delta))`.
pub fn beta_flute(level: usize, dim: usize, horizon: usize, delta: f64, c_beta: f64) -> Result<f64> {
    let arg = (dim * level * horizon) as f64 / delta;
    if level == 0 || !(arg > 1.0) || !(delta > 0.0) || c_beta < 0.0 {
        return Err(Error::invalid(format!(
            "confidence radius needs d*l*H/delta > 1 and c_beta >= 0 (d={dim}, l={level}, H={horizon}, delta={delta}, c={c_beta})"
        )));
    }
    Ok(c_beta * (dim * horizon * level) as f64 * arg.ln().sqrt())
}

/// Largest size of the level-`l` set at one-based stage `h`: `17 d l h 4^l`.
pub fn stage_level_capacity(dim: usize, level: usize, stage: usize) -> f64 {
    17.0 * dim as f64 * level as f64 * stage as f64 * 4f64.powi(level as i32)
}

/// Bound on any fitted level-`l` weight: `9 d 2^l sqrt(H^3 l) / sqrt(lambda)`.
pub fn weight_norm_bound(dim: usize, level: usize, horizon: usize, lambda: f64) -> f64 {
    9.0 * dim as f64 * 2f64.powi(level as i32) * ((horizon as f64).powi(3) * level as f64).sqrt()
        / lambda.sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct FluteConfig {
    pub lambda: f64,
    pub delta: f64,
    pub c_beta: f64,
}

impl Default for FluteConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: 0.05,
            c_beta: 1.0,
        }
    }
}

/// Stored transitions grouped by `(s, a, s')`: count and reward sum.
pub(crate) type GroupedTriples = BTreeMap<(usize, usize, usize), (usize, f64)>;

#[derive(Debug, Clone)]
pub struct FluteLevel {
    design: RegularizedDesign,
    members: Vec<Transition>,
    grouped: GroupedTriples,
    beta: f64,
    weights: Vector,
}

impl FluteLevel {
    pub fn design(&self) -> &RegularizedDesign {
        &self.design
    }

    pub fn members(&self) -> &[Transition] {
        &self.members
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }
}

#[derive(Debug, Clone)]
pub struct FluteAgent {
    dim: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    features: Vec<Vector>,
    config: FluteConfig,
    stages: Vec<Vec<FluteLevel>>,
    total_level: usize,
    fitted_levels: usize,
    /// `q_cache[h][l-1][s*A + a]` for the current episode's fit.
    q_cache: Vec<Vec<Vec<f64>>>,
    max_weight_norms: Vec<Vec<f64>>,
    episodes: u64,
    deep_stage_events: u64,
}

impl FluteAgent {
    /// `features[s * num_actions + a] = phi(s, a)`.
    pub fn new(
        features: Vec<Vector>,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        config: FluteConfig,
    ) -> Result<Self> {
        let dim = features.first().map_or(0, |f| f.len());
        if features.len() != num_states * num_actions || num_states == 0 || num_actions == 0 {
            return Err(Error::invalid("feature table does not match the state/action counts"));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {}", config.delta)));
        }
        RegularizedDesign::new(dim, config.lambda)?;
        beta_flute(1, dim, horizon, config.delta, config.c_beta)?;
        let mut agent = Self {
            dim,
            horizon,
            num_states,
            num_actions,
            features,
            config,
            stages: vec![Vec::new(); horizon],
            total_level: 1,
            fitted_levels: 0,
            q_cache: vec![Vec::new(); horizon],
            max_weight_norms: vec![Vec::new(); horizon],
            episodes: 0,
            deep_stage_events: 0,
        };
        for h in 0..horizon {
            agent.ensure_level(h, 1)?;
        }
        Ok(agent)
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

    fn ensure_level(&mut self, h: usize, level: usize) -> Result<()> {
        while self.stages[h].len() < level {
            let l = self.stages[h].len() + 1;
            self.stages[h].push(FluteLevel {
                design: RegularizedDesign::new(self.dim, self.config.lambda)?,
                members: Vec::new(),
                grouped: GroupedTriples::new(),
                beta: beta_flute(l, self.dim, self.horizon, self.config.delta, self.config.c_beta)?,
                weights: Vector::zeros(self.dim),
            });
            self.max_weight_norms[h].push(0.0);
        }
        Ok(())
    }

    pub fn config(&self) -> FluteConfig {
        self.config
    }

    /// `S_k`: highest nonempty level among stage-one sets (1 initially).
    pub fn total_level(&self) -> usize {
        self.total_level
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Levels at zero-based stage `h`.
    pub fn levels(&self, h: usize) -> &[FluteLevel] {
        &self.stages[h]
    }

    /// Episodes in which a deeper stage held a nonempty level above `S_{k+1}`.
    pub fn deep_stage_events(&self) -> u64 {
        self.deep_stage_events
    }

    fn feature(&self, s: usize, a: usize) -> &Vector {
        &self.features[s * self.num_actions + a]
    }

    /// Refits `w^l_h` for every stage (backwards) and level `l <= S_k`, and
    /// caches the resulting `Q^l_h` tables.
    pub fn fit_episode_weights(&mut self) -> Result<()> {
        let levels = self.total_level;
        for h in 0..self.horizon {
            self.ensure_level(h, levels)?;
        }
        let (ns, na) = (self.num_states, self.num_actions);
        let cap = self.horizon as f64;
        // next_v[l-1][s'] = V^l_{h+1}(s')
        let mut next_v = vec![vec![0.0; ns]; levels];
        let mut cache = vec![Vec::new(); self.horizon];
        for h in (0..self.horizon).rev() {
            let mut q_stage = Vec::with_capacity(levels);
            for l in 0..levels {
                let features = &self.features;
                let level = &mut self.stages[h][l];
                level.design.reset_targets();
                for (&(s, a, sp), &(count, reward_sum)) in &level.grouped {
                    let y = reward_sum + count as f64 * next_v[l][sp];
                    level.design.accumulate_target(&features[s * na + a], y)?;
                }
                level.weights = level.design.ridge_solve();
                let norm = level.weights.norm();
                let slot = &mut self.max_weight_norms[h][l];
                *slot = slot.max(norm);
                let mut q = Vec::with_capacity(ns * na);
                for phi in &self.features {
                    let bonus = level.beta * level.design.elliptical_norm(phi)?;
                    q.push(cap.min(level.weights.dot(phi) + bonus));
                }
                q_stage.push(q);
            }
            for l in 0..levels {
                for s in 0..ns {
                    next_v[l][s] = max_min(&q_stage, l + 1, s, na).1;
                }
            }
            cache[h] = q_stage;
        }
        self.q_cache = cache;
        self.fitted_levels = levels;
        Ok(())
    }

    /// `min{H, w^l_h . phi(s,a) + beta_l ||phi(s,a)||_{(Sigma^l_h)^-1}}` from the
    /// current weights and designs.
    pub fn q_value(&self, h: usize, level: usize, s: usize, a: usize) -> Result<f64> {
        let slot = self
            .stages
            .get(h)
            .and_then(|st| st.get(level.wrapping_sub(1)))
            .ok_or_else(|| Error::invalid(format!("no level {level} at stage {}", h + 1)))?;
        let phi = self.feature(s, a);
        let raw = slot.weights.dot(phi) + slot.beta * slot.design.elliptical_norm(phi)?;
        Ok(raw.min(self.horizon as f64))
    }

    /// `max_a min_{i <= l} Q^i_h(s, a)`.
    pub fn v_value(&self, h: usize, level: usize, s: usize) -> Result<f64> {
        Ok(self.max_min_direct(h, level, s)?.1)
    }

    fn max_min_direct(&self, h: usize, level: usize, s: usize) -> Result<(usize, f64)> {
        if level == 0 {
            return Err(Error::invalid("level must be at least 1"));
        }
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.num_actions {
            let mut m = f64::INFINITY;
            for i in 1..=level {
                m = m.min(self.q_value(h, i, s, a)?);
            }
            if m > best.1 {
                best = (a, m);
            }
        }
        Ok(best)
    }

    /// Action rule at stage `h` given the previous stage's level:
    /// `argmax_a min_{i <= l_prev - 1} Q^i_h(s, a)` using the cached fit.
    /// `l_prev = 1` is treated as a cap of one level.
    pub fn act(&self, h: usize, s: usize, l_prev: usize) -> usize {
        let cap = l_prev.saturating_sub(1).clamp(1, self.fitted_levels.max(1));
        max_min(&self.q_cache[h], cap, s, self.num_actions).0
    }

    /// Level selection: first `l` with norm above `2^-l`, capped at `l_prev`.
    /// Creates the level if needed but does not store anything.
    pub fn assign_level(&mut self, h: usize, phi: &Vector, l_prev: usize) -> Result<usize> {
        let mut level = 1;
        while level + 1 <= l_prev {
            self.ensure_level(h, level)?;
            let norm = self.stages[h][level - 1].design.elliptical_norm(phi)?;
            if norm > 0.5f64.powi(level as i32) {
                break;
            }
            level += 1;
        }
        self.ensure_level(h, level)?;
        Ok(level)
    }

    /// Files a transition at `(h, level)` and folds its feature into the
    /// level's covariance.
    pub fn store(&mut self, h: usize, level: usize, t: Transition) -> Result<()> {
        self.ensure_level(h, level)?;
        let phi = self.features[t.state * self.num_actions + t.action].clone();
        let slot = &mut self.stages[h][level - 1];
        slot.design.rank_one_update(&phi)?;
        let entry = slot.grouped.entry((t.state, t.action, t.next_state)).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += t.reward;
        slot.members.push(t);
        Ok(())
    }

    fn refresh_total_level(&mut self) {
        self.total_level = self.stages[0]
            .iter()
            .rposition(|l| !l.members.is_empty())
            .map_or(1, |i| i + 1);
        let deep = self.stages.iter().skip(1).any(|st| {
            st.iter()
                .enumerate()
                .any(|(i, l)| i + 1 > self.total_level && !l.members.is_empty())
        });
        if deep {
            self.deep_stage_events += 1;
        }
    }

    /// Smallest `Q^l_h(s,a) - Q*_h(s,a)` over the cached fit; negative means
    /// optimism failed somewhere.
    pub fn optimism_margin(&self, optimal: &ValueTables) -> f64 {
        let mut margin = f64::INFINITY;
        for (h, stage) in self.q_cache.iter().enumerate() {
            for q in stage {
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        margin = margin.min(q[s * self.num_actions + a] - optimal.q[h][s][a]);
                    }
                }
            }
        }
        margin
    }

    pub fn run_episode(&mut self, spec: &LinearMdpSpec, rng: &mut impl Rng) -> Result<EpisodeRecord> {
        self.fit_episode_weights()?;
        let levels_before = self.total_level;
        let mut l_prev = self.total_level + 1;
        let mut s = spec.initial_state();
        let mut record = EpisodeRecord::with_capacity(self.horizon, levels_before);
        let mut pending = Vec::with_capacity(self.horizon);
        for h in 0..self.horizon {
            let stage_policy: Vec<usize> = (0..self.num_states).map(|st| self.act(h, st, l_prev)).collect();
            let a = stage_policy[s];
            let phi = self.feature(s, a).clone();
            let level = self.assign_level(h, &phi, l_prev)?;
            let (reward, next) = spec.sample_transition(h, s, a, rng);
            pending.push((
                h,
                level,
                Transition {
                    episode: self.episodes + 1,
                    state: s,
                    action: a,
                    next_state: next,
                    reward,
                },
            ));
            record.push_step(s, a, reward, level, stage_policy);
            l_prev = level;
            s = next;
        }
        for (h, level, t) in pending {
            self.store(h, level, t)?;
        }
        self.episodes += 1;
        self.refresh_total_level();
        Ok(record)
    }
}

/// `(argmax_a, max_a) min_{i <= levels} q[i-1][s*A + a]`, lowest index on ties.
fn max_min(q: &[Vec<f64>], levels: usize, s: usize, num_actions: usize) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..num_actions {
        let m = q[..levels]
            .iter()
            .map(|row| row[s * num_actions + a])
            .fold(f64::INFINITY, f64::min);
        if m > best.1 {
            best = (a, m);
        }
    }
    best
}

impl EpisodicAgent for FluteAgent {
    fn run_episode(&mut self, spec: &LinearMdpSpec, rng: &mut crate::rng::StreamRng) -> Result<EpisodeRecord> {
        FluteAgent::run_episode(self, spec, rng)
    }

    fn occupancy(&self) -> Vec<Vec<usize>> {
        self.stages
            .iter()
            .map(|st| st.iter().map(|l| l.members.len()).collect())
            .collect()
    }

    fn max_weight_norms(&self) -> Vec<Vec<f64>> {
        self.max_weight_norms.clone()
    }

    fn optimism_margin(&self, optimal: &ValueTables) -> f64 {
        FluteAgent::optimism_margin(self, optimal)
    }
}
