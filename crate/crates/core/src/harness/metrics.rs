//! Per-run measurements and the `N_eps` curve.

use serde::Serialize;

use super::config::RunConfig;
use crate::{Error, Result};

/// Counts `|{j <= k : gap_j > eps}|` for every prefix `k` and every `eps` in
/// `grid`. Row `k` holds the counts after the first `k + 1` gaps.
pub fn n_epsilon_curve(gaps: &[f64], grid: &[f64]) -> Result<Vec<Vec<u64>>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("epsilon grid is empty".into()));
    }
    if grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("epsilon grid entries must be positive".into()));
    }
    let mut counts = vec![0u64; grid.len()];
    Ok(gaps
        .iter()
        .map(|&g| {
            for (c, &eps) in counts.iter_mut().zip(grid) {
                if g > eps {
                    *c += 1;
                }
            }
            counts.clone()
        })
        .collect())
}

/// Running sums of `gaps`.
pub fn cumulative(gaps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    gaps.iter()
        .map(|g| {
            acc += g;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Smallest confidence-coverage margin seen (multi-level bandit learner).
    pub min_coverage_margin: Option<f64>,
    /// Rounds after which some level failed to cover the hidden weight.
    pub coverage_violations: u64,
    /// Smallest `Q - Q*` over all fits (MDP learners).
    pub min_optimism_margin: Option<f64>,
    /// Episodes whose fit was not optimistic somewhere.
    pub optimism_violations: u64,
    /// Times a stage past the first filed deeper than the first stage's
    /// deepest level.
    pub deep_stage_events: u64,
    /// Largest `S_k` reached.
    pub max_total_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancySnapshot {
    pub index: u64,
    /// `counts[h][l-1]`.
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub config: RunConfig,
    pub dim: usize,
    /// `Some(H)` on the MDP track.
    pub horizon: Option<usize>,
    pub eps_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub regret: Vec<f64>,
    /// Level round/episode `k` was filed at (stage 1 for MDPs).
    pub levels: Vec<usize>,
    /// Observed reward (bandit) or episode return (MDP).
    pub rewards: Vec<f64>,
    pub n_eps: Vec<Vec<u64>>,
    /// Final `|C_h^l|`, `[stage][level-1]`; one stage on the bandit track.
    pub occupancy: Vec<Vec<usize>>,
    /// Capacity of every occupied level, when the learner has one.
    pub occupancy_caps: Option<Vec<Vec<f64>>>,
    pub weight_norms: Option<Vec<Vec<f64>>>,
    pub weight_caps: Option<Vec<Vec<f64>>>,
    pub occupancy_trace: Vec<OccupancySnapshot>,
    pub diagnostics: Diagnostics,
    pub runtime_secs: f64,
}

impl RunMetrics {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_n_eps(&self) -> Vec<u64> {
        self.n_eps.last().cloned().unwrap_or_else(|| vec![0; self.eps_grid.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_strict() {
        let curve = n_epsilon_curve(&[0.5, 0.1, 0.5, 0.0], &[0.5, 0.25, 0.05]).unwrap();
        assert_eq!(curve[3], vec![0, 2, 3]);
        assert_eq!(curve[0], vec![0, 1, 1]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(matches!(n_epsilon_curve(&[0.1], &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn all_zero_gaps_give_zero_counts() {
        let curve = n_epsilon_curve(&[0.0; 50], &[0.5, 1e-9]).unwrap();
        assert!(curve.iter().all(|row| row == &vec![0, 0]));
        assert_eq!(cumulative(&[0.0; 50])[49], 0.0);
    }
}
