use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{Vector, NORM_SLACK};
use crate::rng::{self, domain};
use crate::{Error, Result};

/// Reward noise added to `<mu*, x>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Centered Gaussian; `sd = 1` is the default 1-sub-Gaussian model.
    Gaussian { sd: f64 },
    /// Uniform on `[-half_width, half_width]`; sub-Gaussian when `half_width <= 1`.
    Uniform { half_width: f64 },
    Zero,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { sd: 1.0 }
    }
}

impl NoiseModel {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sd } => Normal::new(0.0, sd).map(|n| n.sample(rng)).unwrap_or(0.0),
            NoiseModel::Uniform { half_width } if half_width > 0.0 => {
                rng.random_range(-half_width..=half_width)
            }
            NoiseModel::Uniform { .. } | NoiseModel::Zero => 0.0,
        }
    }
}

/// How the decision set `D_k` is produced for round `k` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionSource {
    /// `arms` fresh vectors drawn uniformly from the unit sphere each round.
    RandomSphere { arms: usize },
    /// The same set every round.
    Fixed(Vec<Vector>),
    /// Explicit per-round sets, cycled when `k` exceeds the list.
    Explicit(Vec<Vec<Vector>>),
    /// Two-phase instance on which OFUL is not uniform-PAC.
    Hard { phase_one: usize },
}

#[derive(Debug, Clone)]
pub struct BanditInstance {
    dim: usize,
    mu_star: Vector,
    source: DecisionSource,
    noise: NoiseModel,
    seed: u64,
}

impl BanditInstance {
    pub fn new(mu_star: Vector, source: DecisionSource, noise: NoiseModel, seed: u64) -> Result<Self> {
        let dim = mu_star.len();
        if dim == 0 {
            return Err(Error::invalid("bandit dimension must be at least 1"));
        }
        if mu_star.norm() > 1.0 + NORM_SLACK {
            return Err(Error::invalid(format!(
                "hidden weight norm {} exceeds 1",
                mu_star.norm()
            )));
        }
        match &source {
            DecisionSource::RandomSphere { arms } if *arms == 0 => {
                return Err(Error::invalid("decision sets need at least one arm"))
            }
            DecisionSource::Fixed(set) => check_set(set, dim)?,
            DecisionSource::Explicit(sets) => {
                if sets.is_empty() {
                    return Err(Error::invalid("explicit decision-set list is empty"));
                }
                for set in sets {
                    check_set(set, dim)?;
                }
            }
            DecisionSource::Hard { .. } if dim != 2 => {
                return Err(Error::invalid("the two-phase hard instance is two-dimensional"))
            }
            _ => {}
        }
        Ok(Self {
            dim,
            mu_star,
            source,
            noise,
            seed,
        })
    }

    /// Random unit `mu*` and `arms` random unit actions per round.
    pub fn random_sphere(dim: usize, arms: usize, noise: NoiseModel, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("bandit dimension must be at least 1"));
        }
        let mut rng = rng::stream(seed, domain::INSTANCE, 0);
        let mu = random_unit(&mut rng, dim);
        Self::new(mu, DecisionSource::RandomSphere { arms }, noise, seed)
    }

    /// `d = 2`, `mu* = (0, 1)`, zero noise. Rounds `1..=k` offer
    /// `{(1,0), (-1,0)}`; every later round offers `{(0,1), (0,-1)}`.
    pub fn hard_instance(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("hard instance needs K >= 2, got {k}")));
        }
        Self::new(
            Vector::from_vec(vec![0.0, 1.0]),
            DecisionSource::Hard { phase_one: k },
            NoiseModel::Zero,
            0,
        )
    }

    /// `ceil(log2 K)`, the nominal length of the hard instance's second phase.
    pub fn hard_phase_two_len(k: usize) -> usize {
        (usize::BITS - (k.max(1) - 1).leading_zeros()) as usize
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu_star(&self) -> &Vector {
        &self.mu_star
    }

    pub fn source(&self) -> &DecisionSource {
        &self.source
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same `mu*` and decision rule, with decision sets and noise drawn from
    /// the streams of `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `D_k` for round `k >= 1`; a pure function of `(k, seed)`.
    pub fn decision_set(&self, k: u64) -> Vec<Vector> {
        match &self.source {
            DecisionSource::RandomSphere { arms } => {
                let mut rng = rng::stream(self.seed, domain::DECISION_SET, k);
                (0..*arms).map(|_| random_unit(&mut rng, self.dim)).collect()
            }
            DecisionSource::Fixed(set) => set.clone(),
            DecisionSource::Explicit(sets) => {
                let i = (k.saturating_sub(1) as usize) % sets.len();
                sets[i].clone()
            }
            DecisionSource::Hard { phase_one } => {
                if k as usize <= *phase_one {
                    vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![-1.0, 0.0])]
                } else {
                    vec![Vector::from_vec(vec![0.0, 1.0]), Vector::from_vec(vec![0.0, -1.0])]
                }
            }
        }
    }

    pub fn expected_reward(&self, x: &Vector) -> f64 {
        self.mu_star.dot(x)
    }

    /// Observed reward for playing `x` in round `k`.
    pub fn reward(&self, k: u64, x: &Vector) -> f64 {
        let mut rng = rng::stream(self.seed, domain::NOISE, k);
        self.expected_reward(x) + self.noise.draw(&mut rng)
    }

    /// `max_{y in D} <mu*, y> - <mu*, x>`.
    pub fn gap(&self, set: &[Vector], x: &Vector) -> f64 {
        let best = set
            .iter()
            .map(|y| self.expected_reward(y))
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.expected_reward(x)
    }
}

fn check_set(set: &[Vector], dim: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid("decision set is empty"));
    }
    for x in set {
        if x.len() != dim {
            return Err(Error::invalid(format!(
                "action has dimension {}, instance has {dim}",
                x.len()
            )));
        }
        if x.norm() > 1.0 + NORM_SLACK {
            return Err(Error::invalid(format!("action norm {} exceeds 1", x.norm())));
        }
    }
    Ok(())
}

pub(crate) fn random_unit(rng: &mut impl Rng, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
