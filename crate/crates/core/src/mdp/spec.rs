//! Finite-state linear MDPs with certified structure.
//!
//! `P_h(s'|s,a) = <phi(s,a), theta_h(s')>` and `r_h(s,a) = <phi(s,a), mu_h>`.
//! Every constructor runs [`LinearMdpSpec::certify`] before returning, so a
//! spec in hand always describes a valid episodic MDP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector, NORM_SLACK};
use crate::rng::{self, domain};
use crate::{Error, Result};

const KERNEL_NEG_TOL: f64 = 1e-12;
const KERNEL_SUM_TOL: f64 = 1e-9;
const REWARD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdpSpec {
    dim: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    /// Indexed by `s * num_actions + a`.
    features: Vec<Vector>,
    /// One `d x S` matrix per stage; column `s'` is `theta_h(s')`.
    transition_measures: Vec<Matrix>,
    reward_weights: Vec<Vector>,
    initial_state: usize,
}

/// Outcome of a single certification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Plain serialized form used for instance files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearMdpFile {
    pub dim: usize,
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    /// `features[s * num_actions + a]`
    pub features: Vec<Vec<f64>>,
    /// `transition_measures[h][j][s']`, the `j`-th coordinate of `theta_h(s')`.
    pub transition_measures: Vec<Vec<Vec<f64>>>,
    pub reward_weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub initial_state: usize,
}

impl LinearMdpSpec {
    /// Builds and certifies a spec from raw parts.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        features: Vec<Vector>,
        transition_measures: Vec<Matrix>,
        reward_weights: Vec<Vector>,
        initial_state: usize,
    ) -> Result<Self> {
        let spec = Self::assemble(
            num_states,
            num_actions,
            horizon,
            features,
            transition_measures,
            reward_weights,
            initial_state,
        )?;
        spec.certify_strict()?;
        Ok(spec)
    }

    fn assemble(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        features: Vec<Vector>,
        transition_measures: Vec<Matrix>,
        reward_weights: Vec<Vector>,
        initial_state: usize,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::invalid("states, actions and horizon must be positive"));
        }
        let dim = features.first().map_or(0, |f| f.len());
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() != num_states * num_actions {
            return Err(Error::invalid(format!(
                "expected {} feature vectors, got {}",
                num_states * num_actions,
                features.len()
            )));
        }
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid("feature vectors have inconsistent dimensions"));
        }
        if transition_measures.len() != horizon || reward_weights.len() != horizon {
            return Err(Error::invalid("need one transition measure and reward weight per stage"));
        }
        if transition_measures
            .iter()
            .any(|m| m.nrows() != dim || m.ncols() != num_states)
        {
            return Err(Error::invalid(format!(
                "transition measures must be {dim} x {num_states}"
            )));
        }
        if reward_weights.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("reward weights have the wrong dimension"));
        }
        if initial_state >= num_states {
            return Err(Error::invalid(format!("initial state {initial_state} out of range")));
        }
        Ok(Self {
            dim,
            horizon,
            num_states,
            num_actions,
            features,
            transition_measures,
            reward_weights,
            initial_state,
        })
    }

    /// Indicator-feature embedding of a tabular MDP: `d = S * A`,
    /// `phi(s,a) = e_{s*A+a}`.
    ///
    /// `transitions[h][s][a][s']` and `rewards[h][s][a]`.
    pub fn tabular_to_linear(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: &[Vec<Vec<Vec<f64>>>],
        rewards: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let dim = num_states * num_actions;
        if transitions.len() != horizon || rewards.len() != horizon {
            return Err(Error::invalid("need one transition and reward table per stage"));
        }
        let features = (0..dim)
            .map(|i| {
                let mut e = Vector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        let mut measures = Vec::with_capacity(horizon);
        let mut weights = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let mut theta = Matrix::zeros(dim, num_states);
            let mut mu = Vector::zeros(dim);
            for s in 0..num_states {
                for a in 0..num_actions {
                    let row = transitions[h]
                        .get(s)
                        .and_then(|r| r.get(a))
                        .filter(|r| r.len() == num_states)
                        .ok_or_else(|| {
                            Error::Certification(format!(
                                "stage {} state {s} action {a}: transition row missing or wrong length",
                                h + 1
                            ))
                        })?;
                    for (sp, &p) in row.iter().enumerate() {
                        theta[(s * num_actions + a, sp)] = p;
                    }
                    mu[s * num_actions + a] = *rewards[h].get(s).and_then(|r| r.get(a)).ok_or_else(|| {
                        Error::Certification(format!("stage {} state {s} action {a}: reward missing", h + 1))
                    })?;
                }
            }
            measures.push(theta);
            weights.push(mu);
        }
        Self::new(num_states, num_actions, horizon, features, measures, weights, 0)
    }

    /// Random tabular MDP: Dirichlet(1) transition rows and uniform rewards,
    /// embedded with indicator features.
    pub fn random_tabular(num_states: usize, num_actions: usize, horizon: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, domain::INSTANCE, 1);
        let transitions: Vec<Vec<Vec<Vec<f64>>>> = (0..horizon)
            .map(|_| {
                (0..num_states)
                    .map(|_| (0..num_actions).map(|_| simplex_point(&mut rng, num_states)).collect())
                    .collect()
            })
            .collect();
        let rewards: Vec<Vec<Vec<f64>>> = (0..horizon)
            .map(|_| {
                (0..num_states)
                    .map(|_| (0..num_actions).map(|_| rng.random::<f64>()).collect())
                    .collect()
            })
            .collect();
        Self::tabular_to_linear(num_states, num_actions, horizon, &transitions, &rewards)
    }

    /// Random linear MDP with simplex features: `phi(s,a)` lies on the
    /// probability simplex in `R^d`, each coordinate of `theta_h` is a
    /// distribution over next states, and `mu_h` lies in `[0,1]^d`.
    pub fn random_simplex(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        let mut rng = rng::stream(seed, domain::INSTANCE, 2);
        let features: Vec<Vector> = (0..num_states * num_actions)
            .map(|_| Vector::from_vec(simplex_point(&mut rng, dim)))
            .collect();
        let measures = (0..horizon)
            .map(|_| {
                let mut theta = Matrix::zeros(dim, num_states);
                for j in 0..dim {
                    for (sp, p) in simplex_point(&mut rng, num_states).into_iter().enumerate() {
                        theta[(j, sp)] = p;
                    }
                }
                theta
            })
            .collect();
        let weights = (0..horizon)
            .map(|_| Vector::from_fn(dim, |_, _| rng.random::<f64>()))
            .collect();
        Self::new(num_states, num_actions, horizon, features, measures, weights, 0)
    }

    pub fn from_file(file: LinearMdpFile) -> Result<Self> {
        let spec = Self::from_file_uncertified(file)?;
        spec.certify_strict()?;
        Ok(spec)
    }

    /// Parses a file without running certification, so a faulty instance
    /// can still be inspected check by check.
    pub fn from_file_uncertified(file: LinearMdpFile) -> Result<Self> {
        let features = file.features.iter().map(|f| Vector::from_column_slice(f)).collect();
        let mut measures = Vec::with_capacity(file.horizon);
        for (h, rows) in file.transition_measures.iter().enumerate() {
            if rows.len() != file.dim || rows.iter().any(|r| r.len() != file.num_states) {
                return Err(Error::invalid(format!(
                    "stage {} transition measure must be {} rows of {} entries",
                    h + 1,
                    file.dim,
                    file.num_states
                )));
            }
            measures.push(Matrix::from_fn(file.dim, file.num_states, |j, sp| rows[j][sp]));
        }
        let weights = file.reward_weights.iter().map(|w| Vector::from_column_slice(w)).collect();
        let spec = Self::assemble(
            file.num_states,
            file.num_actions,
            file.horizon,
            features,
            measures,
            weights,
            file.initial_state,
        )?;
        if spec.dim != file.dim {
            return Err(Error::invalid(format!(
                "declared dim {} but features have dimension {}",
                file.dim, spec.dim
            )));
        }
        Ok(spec)
    }

    pub fn to_file(&self) -> LinearMdpFile {
        LinearMdpFile {
            dim: self.dim,
            horizon: self.horizon,
            num_states: self.num_states,
            num_actions: self.num_actions,
            features: self.features.iter().map(|f| f.iter().copied().collect()).collect(),
            transition_measures: self
                .transition_measures
                .iter()
                .map(|m| (0..self.dim).map(|j| m.row(j).iter().copied().collect()).collect())
                .collect(),
            reward_weights: self.reward_weights.iter().map(|w| w.iter().copied().collect()).collect(),
            initial_state: self.initial_state,
        }
    }

    /// Runs every structural check and reports each one.
    pub fn certify(&self) -> Vec<CheckResult> {
        let mut out = Vec::new();
        let mut kernel_fault = None;
        let mut reward_fault = None;
        let mut feature_fault = None;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let phi = self.feature(s, a);
                if feature_fault.is_none() && phi.norm() > 1.0 + NORM_SLACK {
                    feature_fault = Some(format!("state {s} action {a}: ||phi|| = {}", phi.norm()));
                }
                for h in 0..self.horizon {
                    if kernel_fault.is_none() {
                        let row = self.transition_row(h, s, a);
                        let sum: f64 = row.iter().sum();
                        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                        if min < -KERNEL_NEG_TOL || (sum - 1.0).abs() > KERNEL_SUM_TOL {
                            kernel_fault = Some(format!(
                                "stage {} state {s} action {a}: row sum {sum}, min entry {min}",
                                h + 1
                            ));
                        }
                    }
                    if reward_fault.is_none() {
                        let r = self.reward(h, s, a);
                        if !(-REWARD_TOL..=1.0 + REWARD_TOL).contains(&r) {
                            reward_fault =
                                Some(format!("stage {} state {s} action {a}: reward {r}", h + 1));
                        }
                    }
                }
            }
        }
        let bound = (self.dim as f64).sqrt() + NORM_SLACK;
        let mut weight_fault = None;
        let mut measure_fault = None;
        for h in 0..self.horizon {
            let w = self.reward_weights[h].norm();
            if weight_fault.is_none() && w > bound {
                weight_fault = Some(format!("stage {}: ||mu_h|| = {w}", h + 1));
            }
            let total: Vector = self.transition_measures[h].column_sum();
            if measure_fault.is_none() && total.norm() > bound {
                measure_fault = Some(format!("stage {}: ||theta_h(S)|| = {}", h + 1, total.norm()));
            }
        }
        let mut push = |name: &str, fault: Option<String>| {
            out.push(CheckResult {
                name: name.to_string(),
                passed: fault.is_none(),
                detail: fault.unwrap_or_else(|| "ok".into()),
            })
        };
        push("transition-kernel", kernel_fault);
        push("reward-range", reward_fault);
        push("feature-norm", feature_fault);
        push("reward-weight-norm", weight_fault);
        push("transition-measure-norm", measure_fault);
        out
    }

    fn certify_strict(&self) -> Result<()> {
        match self.certify().into_iter().find(|c| !c.passed) {
            Some(c) => Err(Error::Certification(format!("{}: {}", c.name, c.detail))),
            None => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn feature(&self, s: usize, a: usize) -> &Vector {
        &self.features[s * self.num_actions + a]
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    /// `r_h(s,a)` for zero-based stage `h`.
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.feature(s, a).dot(&self.reward_weights[h])
    }

    /// `(P_h(s'|s,a))_{s'}` for zero-based stage `h`.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        let phi = self.feature(s, a);
        let theta = &self.transition_measures[h];
        (0..self.num_states).map(|sp| theta.column(sp).dot(phi)).collect()
    }

    /// Deterministic reward and a next state drawn by inverse-CDF sampling.
    pub fn sample_transition(&self, h: usize, s: usize, a: usize, rng: &mut impl Rng) -> (f64, usize) {
        let row = self.transition_row(h, s, a);
        let u: f64 = rng.random::<f64>() * row.iter().map(|p| p.max(0.0)).sum::<f64>();
        let mut acc = 0.0;
        let mut next = self.num_states - 1;
        for (sp, &p) in row.iter().enumerate() {
            let p = p.max(0.0);
            if p == 0.0 {
                continue;
            }
            acc += p;
            if u < acc {
                next = sp;
                break;
            }
            next = sp;
        }
        (self.reward(h, s, a), next)
    }
}

/// Uniform point on the probability simplex (Dirichlet(1)).
fn simplex_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flip_chain(horizon: usize) -> LinearMdpSpec {
        let t = vec![vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]]; horizon];
        let r = vec![vec![vec![0.0], vec![1.0]]; horizon];
        LinearMdpSpec::tabular_to_linear(2, 1, horizon, &t, &r).unwrap()
    }

    #[test]
    fn degenerate_chain_embedding() {
        let spec = LinearMdpSpec::tabular_to_linear(1, 1, 1, &[vec![vec![vec![1.0]]]], &[vec![vec![0.5]]]).unwrap();
        assert_eq!(spec.dim(), 1);
        assert_eq!(spec.feature(0, 0), &Vector::from_vec(vec![1.0]));
        assert_eq!(spec.reward(0, 0, 0), 0.5);
        assert_eq!(spec.transition_row(0, 0, 0), vec![1.0]);
    }

    #[test]
    fn flip_chain_is_exact() {
        let spec = flip_chain(2);
        assert_eq!(spec.transition_row(0, 0, 0), vec![0.0, 1.0]);
        assert_eq!(spec.transition_row(1, 1, 0), vec![1.0, 0.0]);
        let mut rng = rng::stream(1, 0, 0);
        for _ in 0..50 {
            assert_eq!(spec.sample_transition(0, 0, 0, &mut rng), (0.0, 1));
        }
    }

    #[test]
    fn random_tabular_rows_sum_to_one() {
        let spec = LinearMdpSpec::random_tabular(3, 2, 3, 5).unwrap();
        assert_eq!(spec.dim(), 6);
        for h in 0..3 {
            for s in 0..3 {
                for a in 0..2 {
                    let sum: f64 = spec.transition_row(h, s, a).iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
        assert!(spec.certify().iter().all(|c| c.passed));
    }

    #[test]
    fn random_simplex_certifies() {
        let spec = LinearMdpSpec::random_simplex(4, 3, 2, 3, 11).unwrap();
        assert_eq!(spec.dim(), 3);
        assert!(spec.certify().iter().all(|c| c.passed));
    }

    #[test]
    fn faults_are_named() {
        let t = vec![vec![vec![vec![0.6, 0.5]], vec![vec![1.0, 0.0]]]];
        let r = vec![vec![vec![0.0], vec![1.0]]];
        let err = LinearMdpSpec::tabular_to_linear(2, 1, 1, &t, &r).unwrap_err();
        assert!(err.to_string().contains("stage 1 state 0 action 0"), "{err}");

        let t = vec![vec![vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]]]];
        let r = vec![vec![vec![1.2], vec![1.0]]];
        let err = LinearMdpSpec::tabular_to_linear(2, 1, 1, &t, &r).unwrap_err();
        assert!(err.to_string().contains("reward-range"), "{err}");
    }

    #[test]
    fn uniform_row_sampling_frequencies() {
        let t = vec![vec![vec![vec![0.25; 4]]; 4]];
        let r = vec![vec![vec![0.0]; 4]];
        let spec = LinearMdpSpec::tabular_to_linear(4, 1, 1, &t, &r).unwrap();
        let mut rng = rng::stream(2, domain::TRANSITION, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[spec.sample_transition(0, 0, 0, &mut rng).1] += 1;
        }
        // binomial standard deviation of the empirical frequency
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn file_round_trip() {
        let spec = LinearMdpSpec::random_simplex(3, 2, 2, 2, 4).unwrap();
        let text = serde_json::to_string(&spec.to_file()).unwrap();
        let back = LinearMdpSpec::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
