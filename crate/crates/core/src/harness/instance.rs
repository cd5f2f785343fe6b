//! Instance construction and certification.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{InstanceConfig, RunConfig};
use crate::bandit::{BanditInstance, DecisionSource, NoiseModel};
use crate::linalg::{Vector, NORM_SLACK};
use crate::mdp::{CheckResult, LinearMdpFile, LinearMdpSpec};
use crate::{Error, Result};

/// Tabular MDP given by explicit transition and reward tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularMdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// `transitions[h][s][a][s']`
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// `rewards[h][s][a]`
    pub rewards: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial_state: usize,
}

/// Bandit with explicit decision sets, cycled round by round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BanditFile {
    pub mu_star: Vec<f64>,
    pub decision_sets: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub noise: NoiseModel,
}

/// On-disk instance; `kind` selects the variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFile {
    LinearMdp(LinearMdpFile),
    TabularMdp(TabularMdpFile),
    Bandit(BanditFile),
}

impl InstanceFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("instance files always serialize");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Every structural check, pass or fail.
    pub fn certify(&self) -> Result<Vec<CheckResult>> {
        match self {
            InstanceFile::LinearMdp(f) => Ok(LinearMdpSpec::from_file_uncertified(f.clone())?.certify()),
            InstanceFile::TabularMdp(f) => {
                Ok(LinearMdpSpec::from_file_uncertified(tabular_as_linear(f)?)?.certify())
            }
            InstanceFile::Bandit(f) => Ok(certify_bandit_file(f)),
        }
    }
}

/// Indicator-feature embedding of a tabular file, without certification.
pub fn tabular_as_linear(f: &TabularMdpFile) -> Result<LinearMdpFile> {
    let (ns, na, horizon) = (f.num_states, f.num_actions, f.horizon);
    let shape_ok = f.transitions.len() == horizon
        && f.rewards.len() == horizon
        && f.transitions.iter().all(|st| {
            st.len() == ns && st.iter().all(|row| row.len() == na && row.iter().all(|p| p.len() == ns))
        })
        && f.rewards.iter().all(|st| st.len() == ns && st.iter().all(|row| row.len() == na));
    if !shape_ok {
        return Err(Error::invalid(format!(
            "tabular tables must have shape H={horizon} x S={ns} x A={na} (x S for transitions)"
        )));
    }
    let dim = ns * na;
    let features = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let transition_measures = (0..horizon)
        .map(|h| {
            (0..dim)
                .map(|j| f.transitions[h][j / na][j % na].clone())
                .collect()
        })
        .collect();
    let reward_weights = (0..horizon)
        .map(|h| (0..dim).map(|j| f.rewards[h][j / na][j % na]).collect())
        .collect();
    Ok(LinearMdpFile {
        dim,
        horizon,
        num_states: ns,
        num_actions: na,
        features,
        transition_measures,
        reward_weights,
        initial_state: f.initial_state,
    })
}

fn certify_bandit_file(f: &BanditFile) -> Vec<CheckResult> {
    let dim = f.mu_star.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = Vec::new();
    let mut push = |name: &str, fault: Option<String>| {
        out.push(CheckResult {
            name: name.into(),
            passed: fault.is_none(),
            detail: fault.unwrap_or_else(|| "ok".into()),
        })
    };
    push(
        "hidden-weight-norm",
        (dim == 0 || norm(&f.mu_star) > 1.0 + NORM_SLACK)
            .then(|| format!("||mu*|| = {} (dimension {dim})", norm(&f.mu_star))),
    );
    push(
        "decision-sets-nonempty",
        if f.decision_sets.is_empty() {
            Some("no decision sets".into())
        } else {
            f.decision_sets
                .iter()
                .position(Vec::is_empty)
                .map(|k| format!("decision set {} is empty", k + 1))
        },
    );
    let mut dim_fault = None;
    let mut norm_fault = None;
    for (k, set) in f.decision_sets.iter().enumerate() {
        for (i, x) in set.iter().enumerate() {
            if dim_fault.is_none() && x.len() != dim {
                dim_fault = Some(format!("set {} action {i}: dimension {} != {dim}", k + 1, x.len()));
            }
            if norm_fault.is_none() && norm(x) > 1.0 + NORM_SLACK {
                norm_fault = Some(format!("set {} action {i}: ||x|| = {}", k + 1, norm(x)));
            }
        }
    }
    push("action-dimension", dim_fault);
    push("action-norm", norm_fault);
    out
}

/// Checks a generated bandit instance over its first `rounds` rounds.
pub fn certify_bandit_instance(instance: &BanditInstance, rounds: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, fault: Option<String>| {
        out.push(CheckResult {
            name: name.into(),
            passed: fault.is_none(),
            detail: fault.unwrap_or_else(|| "ok".into()),
        })
    };
    let mu = instance.mu_star().norm();
    push(
        "hidden-weight-norm",
        (mu > 1.0 + NORM_SLACK).then(|| format!("||mu*|| = {mu}")),
    );
    let mut norm_fault = None;
    let mut empty_fault = None;
    let mut replay_fault = None;
    for k in 1..=rounds {
        let set = instance.decision_set(k);
        if empty_fault.is_none() && set.is_empty() {
            empty_fault = Some(format!("round {k}: empty decision set"));
        }
        if norm_fault.is_none() {
            if let Some(i) = set.iter().position(|x| x.norm() > 1.0 + NORM_SLACK) {
                norm_fault = Some(format!("round {k} action {i}: ||x|| = {}", set[i].norm()));
            }
        }
        if replay_fault.is_none() && (set != instance.decision_set(k) || instance.reward(k, &set[0]) != instance.reward(k, &set[0])) {
            replay_fault = Some(format!("round {k}: regenerated round differs"));
        }
    }
    push("decision-sets-nonempty", empty_fault);
    push("action-norm", norm_fault);
    push("replay-determinism", replay_fault);
    out
}

pub fn build_bandit_instance(cfg: &RunConfig) -> Result<BanditInstance> {
    match &cfg.instance {
        InstanceConfig::RandomSphere { dim, arms } => {
            Ok(BanditInstance::random_sphere(*dim, *arms, cfg.noise, cfg.instance_seed)?.with_seed(cfg.seed))
        }
        InstanceConfig::Hard { hard_k } => BanditInstance::hard_instance(*hard_k),
        InstanceConfig::BanditFile { path } => match InstanceFile::read(path)? {
            InstanceFile::Bandit(f) => bandit_from_file(&f, cfg.seed),
            _ => Err(Error::Config(format!("{} is not a bandit instance", path.display()))),
        },
        _ => Err(Error::Config("instance does not belong to the bandit track".into())),
    }
}

pub fn bandit_from_file(f: &BanditFile, seed: u64) -> Result<BanditInstance> {
    if let Some(c) = certify_bandit_file(f).into_iter().find(|c| !c.passed) {
        return Err(Error::Certification(format!("{}: {}", c.name, c.detail)));
    }
    let sets = f
        .decision_sets
        .iter()
        .map(|set| set.iter().map(|x| Vector::from_column_slice(x)).collect())
        .collect();
    BanditInstance::new(
        Vector::from_column_slice(&f.mu_star),
        DecisionSource::Explicit(sets),
        f.noise,
        seed,
    )
}

pub fn build_mdp_spec(cfg: &RunConfig) -> Result<LinearMdpSpec> {
    match &cfg.instance {
        InstanceConfig::TabularRandom {
            states,
            actions,
            horizon,
        } => LinearMdpSpec::random_tabular(*states, *actions, *horizon, cfg.instance_seed),
        InstanceConfig::SimplexRandom {
            states,
            actions,
            horizon,
            dim,
        } => LinearMdpSpec::random_simplex(*states, *actions, *horizon, *dim, cfg.instance_seed),
        InstanceConfig::MdpFile { path } => match InstanceFile::read(path)? {
            InstanceFile::LinearMdp(f) => LinearMdpSpec::from_file(f),
            InstanceFile::TabularMdp(f) => LinearMdpSpec::from_file(tabular_as_linear(&f)?),
            InstanceFile::Bandit(_) => Err(Error::Config(format!("{} is a bandit instance", path.display()))),
        },
        _ => Err(Error::Config("instance does not belong to the mdp track".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tabular() -> TabularMdpFile {
        TabularMdpFile {
            num_states: 2,
            num_actions: 2,
            horizon: 2,
            transitions: vec![vec![vec![vec![0.5, 0.5]; 2]; 2]; 2],
            rewards: vec![vec![vec![0.25; 2]; 2]; 2],
            initial_state: 0,
        }
    }

    #[test]
    fn corrupted_row_is_named() {
        let mut f = tabular();
        f.transitions[1][0][1] = vec![0.6, 0.5];
        let checks = InstanceFile::TabularMdp(f).certify().unwrap();
        let bad = checks.iter().find(|c| !c.passed).unwrap();
        assert_eq!(bad.name, "transition-kernel");
        assert!(bad.detail.contains("stage 2 state 0 action 1"), "{}", bad.detail);
    }

    #[test]
    fn clean_tabular_passes_and_round_trips() {
        let file = InstanceFile::TabularMdp(tabular());
        assert!(file.certify().unwrap().iter().all(|c| c.passed));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        file.write(&path).unwrap();
        assert!(matches!(InstanceFile::read(&path).unwrap(), InstanceFile::TabularMdp(_)));
    }

    #[test]
    fn bandit_file_checks() {
        let good = BanditFile {
            mu_star: vec![0.6, 0.8],
            decision_sets: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            noise: NoiseModel::Zero,
        };
        assert!(certify_bandit_file(&good).iter().all(|c| c.passed));
        let inst = bandit_from_file(&good, 0).unwrap();
        assert_eq!(inst.decision_set(7).len(), 2);

        let mut bad = good.clone();
        bad.decision_sets[0][1] = vec![0.0, 1.5];
        let fail: Vec<_> = certify_bandit_file(&bad).into_iter().filter(|c| !c.passed).collect();
        assert_eq!(fail.len(), 1);
        assert_eq!(fail[0].name, "action-norm");
        assert!(bandit_from_file(&bad, 0).is_err());
    }

    #[test]
    fn generated_instances_certify() {
        let inst = BanditInstance::random_sphere(4, 6, NoiseModel::default(), 3).unwrap();
        assert!(certify_bandit_instance(&inst, 200).iter().all(|c| c.passed));
    }
}
