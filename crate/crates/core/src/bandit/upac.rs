//! UPAC-OFUL: optimistic linear bandit learner over a disjoint multi-level
//! partition of past rounds.
//!
//! Each level `l` fits its own ridge estimate on the rounds it owns and has
//! its own radius `beta_l`. An action is scored by the minimum of the
//! per-level upper confidence bounds over levels `1..=S_k`, and the chosen
//! action is filed at the lowest level where its elliptical norm still
//! exceeds `2^-l`.

use crate::linalg::{RegularizedDesign, Vector};
use crate::{Error, Result};

/// `6 * sqrt(d l log(d l / delta))`.
pub fn beta_bandit(level: usize, dim: usize, delta: f64) -> Result<f64> {
    let dl = (dim * level) as f64;
    let arg = dl / delta;
    if level == 0 || dim == 0 || !(arg > 1.0) || !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "confidence radius needs d*l/delta > 1 (d={dim}, l={level}, delta={delta})"
        )));
    }
    Ok(6.0 * (dl * arg.ln()).sqrt())
}

/// Largest size any single level can reach: `17 d l 4^l`.
pub fn level_capacity(dim: usize, level: usize) -> f64 {
    17.0 * dim as f64 * level as f64 * 4f64.powi(level as i32)
}

#[derive(Debug, Clone)]
pub struct UpacLevel {
    design: RegularizedDesign,
    members: Vec<u64>,
    beta: f64,
    weights: Vector,
}

impl UpacLevel {
    pub fn design(&self) -> &RegularizedDesign {
        &self.design
    }

    /// Round indices filed at this level.
    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Current ridge estimate `w^l`.
    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    fn upper_bound(&self, x: &Vector) -> Result<f64> {
        Ok(self.weights.dot(x) + self.beta * self.design.elliptical_norm(x)?)
    }
}

/// Where an action was filed, together with the elliptical norms the
/// level-selection loop compared against `2^-l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAssignment {
    pub level: usize,
    /// `trace[i]` is the norm at level `i + 1`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct UpacOful {
    dim: usize,
    lambda: f64,
    delta: f64,
    levels: Vec<UpacLevel>,
    total_level: usize,
    rounds: u64,
}

impl UpacOful {
    pub fn new(dim: usize, lambda: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
        }
        // validates dim and lambda
        RegularizedDesign::new(dim, lambda)?;
        let mut agent = Self {
            dim,
            lambda,
            delta,
            levels: Vec::new(),
            total_level: 1,
            rounds: 0,
        };
        agent.ensure_level(1)?;
        Ok(agent)
    }

    fn ensure_level(&mut self, level: usize) -> Result<()> {
        while self.levels.len() < level {
            let l = self.levels.len() + 1;
            self.levels.push(UpacLevel {
                design: RegularizedDesign::new(self.dim, self.lambda)?,
                members: Vec::new(),
                beta: beta_bandit(l, self.dim, self.delta)?,
                weights: Vector::zeros(self.dim),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `S_k`, the highest nonempty level (1 before any round).
    pub fn total_level(&self) -> usize {
        self.total_level
    }

    /// All levels created so far; may include one empty level above `S_k`.
    pub fn levels(&self) -> &[UpacLevel] {
        &self.levels
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "action has dimension {}, agent has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `min_{l <= S_k} w^l . x + beta_l ||x||_{(Sigma^l)^-1}`.
    pub fn optimistic_score(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        let mut score = f64::INFINITY;
        for level in &self.levels[..self.total_level] {
            score = score.min(level.upper_bound(x)?);
        }
        Ok(score)
    }

    /// Index of the action with the largest optimistic score; lowest index on ties.
    pub fn select_action(&self, decision_set: &[Vector]) -> Result<usize> {
        if decision_set.is_empty() {
            return Err(Error::invalid("decision set is empty"));
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, x) in decision_set.iter().enumerate() {
            let s = self.optimistic_score(x)?;
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        Ok(best)
    }

    /// Lowest level whose elliptical norm for `x` exceeds `2^-l`, capped at
    /// `S_k + 1`. Creates level `S_k + 1` when it is reached.
    pub fn assign_level(&mut self, x: &Vector) -> Result<LevelAssignment> {
        self.check_dim(x)?;
        let mut level = 1;
        let mut trace = Vec::new();
        while level <= self.total_level {
            let norm = self.levels[level - 1].design.elliptical_norm(x)?;
            trace.push(norm);
            if norm > 0.5f64.powi(level as i32) {
                break;
            }
            level += 1;
        }
        self.ensure_level(level)?;
        Ok(LevelAssignment { level, trace })
    }

    /// Files the current round at `level` and folds `(x, r)` into that level.
    pub fn observe_reward(&mut self, x: &Vector, reward: f64, level: usize) -> Result<()> {
        self.check_dim(x)?;
        if level == 0 || level > self.total_level + 1 {
            return Err(Error::invalid(format!(
                "level {level} outside 1..={}",
                self.total_level + 1
            )));
        }
        self.ensure_level(level)?;
        self.rounds += 1;
        let slot = &mut self.levels[level - 1];
        slot.members.push(self.rounds);
        slot.design.rank_one_update(x)?;
        slot.design.accumulate_target(x, reward)?;
        slot.weights = slot.design.ridge_solve();
        self.total_level = self
            .levels
            .iter()
            .rposition(|l| !l.members.is_empty())
            .map_or(1, |i| i + 1);
        Ok(())
    }

    /// `|C^l|` for every created level.
    pub fn occupancy(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.members.len()).collect()
    }

    /// `min_l beta_l - ||w^l - mu*||_{Sigma^l}` over levels `1..=S_k`;
    /// negative means some level's confidence ellipsoid misses `mu*`.
    pub fn coverage_margin(&self, mu_star: &Vector) -> f64 {
        self.levels[..self.total_level]
            .iter()
            .map(|l| {
                let diff = &l.weights - mu_star;
                let norm = crate::linalg::quad_form(l.design.cov(), &diff).max(0.0).sqrt();
                l.beta - norm
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn beta_values() {
        // 6 sqrt(2 ln 20) and 6 sqrt(4 ln 40), evaluated directly
        assert!((beta_bandit(1, 2, 0.1).unwrap() - 14.686_480_984_084_898).abs() < 1e-9);
        assert!((beta_bandit(2, 2, 0.1).unwrap() - 23.047_746_991_678_096).abs() < 1e-9);
        assert!(matches!(beta_bandit(1, 1, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn capacity_formula() {
        assert_eq!(level_capacity(2, 1), 136.0);
        assert_eq!(level_capacity(5, 3), 17.0 * 5.0 * 3.0 * 64.0);
    }

    #[test]
    fn fresh_agent_scores() {
        let agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        let s = agent.optimistic_score(&v(0.6, 0.8)).unwrap();
        assert!((s - 14.686_480_984_084_898).abs() < 1e-9);
        assert_eq!(agent.optimistic_score(&v(0.0, 0.0)).unwrap(), 0.0);
        assert!(agent.optimistic_score(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn min_takes_the_smaller_level() {
        // Seed level 2 with a high-reward sample along the probe direction.
        let mut agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        let x = v(1.0, 0.0);
        for _ in 0..3 {
            let a = agent.assign_level(&x).unwrap();
            assert_eq!(a.level, 1);
            agent.observe_reward(&x, 0.0, a.level).unwrap();
        }
        let a = agent.assign_level(&x).unwrap();
        assert_eq!(a.level, 2);
        agent.observe_reward(&x, 5.0, 2).unwrap();

        let probe = v(1.0, 0.0);
        let l1 = &agent.levels()[0];
        let l2 = &agent.levels()[1];
        let s1 = l1.weights().dot(&probe) + l1.beta() * l1.design().elliptical_norm(&probe).unwrap();
        let s2 = l2.weights().dot(&probe) + l2.beta() * l2.design().elliptical_norm(&probe).unwrap();
        assert!(s2 > s1);
        assert_eq!(agent.optimistic_score(&probe).unwrap(), s1.min(s2));
        assert_eq!(agent.optimistic_score(&probe).unwrap(), s1);
    }

    #[test]
    fn select_action_rules() {
        let agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        assert_eq!(agent.select_action(&[v(1.0, 0.0), v(0.5, 0.0)]).unwrap(), 0);
        assert_eq!(agent.select_action(&[v(0.3, 0.1)]).unwrap(), 0);
        assert_eq!(agent.select_action(&[v(0.3, 0.1), v(0.3, 0.1)]).unwrap(), 0);
        assert_eq!(agent.select_action(&[v(0.5, 0.0), v(1.0, 0.0)]).unwrap(), 1);
        assert!(matches!(agent.select_action(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn assign_level_bootstrap_and_zero_vector() {
        let mut agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        assert_eq!(agent.assign_level(&v(0.0, 1.0)).unwrap().level, 1);
        let a = agent.assign_level(&v(0.0, 0.0)).unwrap();
        assert_eq!(a.level, agent.total_level() + 1);
        assert_eq!(a.trace, vec![0.0]);
    }

    #[test]
    fn fourth_copy_falls_to_level_two() {
        let mut agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        let x = v(1.0, 0.0);
        for n in 0..3 {
            let a = agent.assign_level(&x).unwrap();
            assert_eq!(a.level, 1, "copy {n}");
            agent.observe_reward(&x, 1.0, 1).unwrap();
        }
        let a = agent.assign_level(&x).unwrap();
        // (1 + 3)^-1/2 = 0.5 <= 2^-1
        assert_eq!(a.trace, vec![0.5]);
        assert_eq!(a.level, 2);
        agent.observe_reward(&x, 1.0, 2).unwrap();
        assert_eq!(agent.total_level(), 2);
    }

    #[test]
    fn observe_bookkeeping() {
        let mut agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        let x = v(0.0, 1.0);
        let a = agent.assign_level(&x).unwrap();
        agent.observe_reward(&x, 1.0, a.level).unwrap();
        assert_eq!(agent.occupancy(), vec![1]);
        assert_eq!(agent.total_level(), 1);
        assert_eq!(agent.levels()[0].members(), &[1]);
        assert!(agent.observe_reward(&x, 1.0, 3).is_err());

        let z = v(0.0, 0.0);
        let a = agent.assign_level(&z).unwrap();
        assert_eq!(a.level, 2);
        agent.observe_reward(&z, 0.0, a.level).unwrap();
        assert_eq!(agent.total_level(), 2);
    }

    #[test]
    fn empty_intermediate_levels_use_the_prior() {
        let mut agent = UpacOful::new(2, 1.0, 0.1).unwrap();
        let z = v(0.0, 0.0);
        let a = agent.assign_level(&z).unwrap();
        agent.observe_reward(&z, 0.0, a.level).unwrap();
        // level 1 is empty but below S_k = 2; it still bounds the score
        assert_eq!(agent.total_level(), 2);
        assert_eq!(agent.occupancy(), vec![0, 1]);
        let x = v(1.0, 0.0);
        let b1 = beta_bandit(1, 2, 0.1).unwrap();
        let b2 = beta_bandit(2, 2, 0.1).unwrap();
        assert!((agent.optimistic_score(&x).unwrap() - b1.min(b2)).abs() < 1e-12);
    }
}
