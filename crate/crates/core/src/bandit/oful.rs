//! OFUL baseline: one ridge design over every past round and a radius that
//! grows like `sqrt(d log k)`.
//!
//! The unit-ball variant scores an action by `max <x, theta>` over the
//! confidence ellipsoid intersected with the unit ball, which is the
//! version that provably keeps pulling gap-1 arms on the hard instance.

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{RegularizedDesign, Vector};
use crate::rng::{self, domain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Lowest,
    Random,
}

/// Scores within this distance of the maximum count as tied under
/// [`TieBreak::Random`].
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OfulConfig {
    pub lambda: f64,
    pub delta: f64,
    pub unit_ball: bool,
    pub tie_break: TieBreak,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Oful {
    design: RegularizedDesign,
    config: OfulConfig,
    weights: Vector,
    rounds: u64,
}

/// `sqrt(d log((1 + k)/delta)) + sqrt(lambda)` after `k` samples.
pub fn oful_radius(dim: usize, samples: u64, delta: f64, lambda: f64) -> f64 {
    (dim as f64 * ((1.0 + samples as f64) / delta).ln()).sqrt() + lambda.sqrt()
}

impl Oful {
    pub fn new(dim: usize, config: OfulConfig) -> Result<Self> {
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0,1), got {}",
                config.delta
            )));
        }
        Ok(Self {
            design: RegularizedDesign::new(dim, config.lambda)?,
            config,
            weights: Vector::zeros(dim),
            rounds: 0,
        })
    }

    pub fn design(&self) -> &RegularizedDesign {
        &self.design
    }

    pub fn radius(&self) -> f64 {
        oful_radius(self.design.dim(), self.rounds, self.config.delta, self.config.lambda)
    }

    /// Optimistic value of every action in the set.
    pub fn scores(&self, decision_set: &[Vector]) -> Result<Vec<f64>> {
        let beta = self.radius();
        if self.config.unit_ball {
            let eig = SymmetricEigen::new(self.design.cov().clone());
            decision_set
                .iter()
                .map(|x| Ok(ball_constrained_score(&eig, &self.weights, beta, x)))
                .collect()
        } else {
            decision_set
                .iter()
                .map(|x| Ok(self.weights.dot(x) + beta * self.design.elliptical_norm(x)?))
                .collect()
        }
    }

    /// Chooses an action for round `k` (the round index keys the tie-break stream).
    pub fn select_action(&self, k: u64, decision_set: &[Vector]) -> Result<usize> {
        if decision_set.is_empty() {
            return Err(Error::invalid("decision set is empty"));
        }
        for x in decision_set {
            if x.len() != self.design.dim() {
                return Err(Error::invalid("action dimension does not match the agent"));
            }
        }
        let scores = self.scores(decision_set)?;
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self.config.tie_break {
            TieBreak::Lowest => Ok(scores.iter().position(|&s| s == best).unwrap_or(0)),
            TieBreak::Random => {
                let tied: Vec<usize> = scores
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s >= best - TIE_TOLERANCE)
                    .map(|(i, _)| i)
                    .collect();
                let mut rng = rng::stream(self.config.seed, domain::TIE_BREAK, k);
                Ok(tied[rng.random_range(0..tied.len())])
            }
        }
    }

    pub fn observe_reward(&mut self, x: &Vector, reward: f64) -> Result<()> {
        self.design.rank_one_update(x)?;
        self.design.accumulate_target(x, reward)?;
        self.weights = self.design.ridge_solve();
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }
}

/// `max <x, theta>` subject to `||theta - center||_Sigma <= beta` and
/// `||theta|| <= 1`.
///
/// Works in the eigenbasis of `Sigma`. When neither single-constraint
/// maximizer is feasible for the other constraint, both are active and the
/// two Lagrange multipliers are found by nested bisection on the convex dual.
/// If the ellipsoid misses the unit ball entirely the ellipsoid-only value is
/// returned.
pub fn ball_constrained_score(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    center: &Vector,
    beta: f64,
    x: &Vector,
) -> f64 {
    ball_constrained_argmax(eig, center, beta, x).0
}

/// Value and maximizing `theta` for [`ball_constrained_score`].
pub fn ball_constrained_argmax(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    center: &Vector,
    beta: f64,
    x: &Vector,
) -> (f64, Vector) {
    let q = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let u = q.transpose() * x;
    let c = q.transpose() * center;
    let dim = u.len();
    let u_norm = u.norm();
    if u_norm == 0.0 {
        return (0.0, center.clone());
    }
    let back = |z: &Vector| q * z;

    let ellipsoid_excess = |z: &Vector| -> f64 {
        (0..dim).map(|i| lam[i] * (z[i] - c[i]).powi(2)).sum::<f64>() - beta * beta
    };

    // Ellipsoid-only maximizer.
    let inv_norm = (0..dim).map(|i| u[i] * u[i] / lam[i]).sum::<f64>().sqrt();
    let z_ell = Vector::from_fn(dim, |i, _| c[i] + beta * u[i] / (lam[i] * inv_norm));
    let ellipsoid_value = u.dot(&z_ell);
    if z_ell.norm_squared() <= 1.0 {
        return (ellipsoid_value, back(&z_ell));
    }

    // Ball-only maximizer.
    let z_ball = &u / u_norm;
    if ellipsoid_excess(&z_ball) <= 0.0 {
        return (u_norm, back(&z_ball));
    }

    // z_i(A, B) = (u_i + A lam_i c_i) / (A lam_i + B)
    let point = |a: f64, b: f64| Vector::from_fn(dim, |i, _| (u[i] + a * lam[i] * c[i]) / (a * lam[i] + b));
    let ball_multiplier = |a: f64| -> f64 {
        if point(a, 0.0).norm_squared() <= 1.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while point(a, hi).norm_squared() > 1.0 {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if point(a, mid).norm_squared() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };

    let mut a_hi = 1e-6;
    loop {
        let z = point(a_hi, ball_multiplier(a_hi));
        if ellipsoid_excess(&z) <= 0.0 {
            break;
        }
        a_hi *= 2.0;
        if a_hi > 1e15 {
            return (ellipsoid_value, back(&z_ell));
        }
    }
    let mut a_lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (a_lo + a_hi);
        let z = point(mid, ball_multiplier(mid));
        if ellipsoid_excess(&z) > 0.0 {
            a_lo = mid;
        } else {
            a_hi = mid;
        }
    }
    let z = point(a_hi, ball_multiplier(a_hi));
    (u.dot(&z), back(&z))
}
