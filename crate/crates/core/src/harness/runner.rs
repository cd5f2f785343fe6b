//! Seeded experiment loops with exact gaps and runtime invariant checks.

use std::time::Instant;

use super::config::{Algorithm, InstanceConfig, RunConfig, Track};
use super::instance::{build_bandit_instance, build_mdp_spec};
use super::config::default_eps_grid;
use super::metrics::{cumulative, n_epsilon_curve, Diagnostics, OccupancySnapshot, RunMetrics};
use crate::bandit::{level_capacity, BanditAgent, BanditInstance, Oful, OfulConfig, UpacOful};
use crate::mdp::{
    evaluate_policy, exact_optimal_values, stage_level_capacity, weight_norm_bound, EpisodicAgent, FluteAgent,
    FluteConfig, LinearMdpSpec, LsviUcb,
};
use crate::rng::{self, domain};
use crate::{Error, Result};

/// Gaps below this are treated as rounding noise; anything lower is a bug.
pub const GAP_FLOOR: f64 = -1e-9;

pub fn run_experiment(cfg: &RunConfig) -> Result<RunMetrics> {
    match cfg.track {
        Track::Bandit => run_bandit_experiment(cfg),
        Track::Mdp => run_mdp_experiment(cfg),
    }
}

pub fn run_bandit_experiment(cfg: &RunConfig) -> Result<RunMetrics> {
    let instance = build_bandit_instance(cfg)?;
    run_bandit_on(cfg, &instance)
}

pub fn run_mdp_experiment(cfg: &RunConfig) -> Result<RunMetrics> {
    let spec = build_mdp_spec(cfg)?;
    run_mdp_on(cfg, &spec)
}

enum BanditLearner {
    Upac(UpacOful),
    Oful(Oful),
}

impl BanditLearner {
    fn agent(&mut self) -> &mut dyn BanditAgent {
        match self {
            BanditLearner::Upac(a) => a,
            BanditLearner::Oful(a) => a,
        }
    }
}

fn snapshot(index: u64, counts: Vec<Vec<usize>>) -> OccupancySnapshot {
    OccupancySnapshot { index, counts }
}

/// Runs `cfg` against an already built instance.
pub fn run_bandit_on(cfg: &RunConfig, instance: &BanditInstance) -> Result<RunMetrics> {
    let start = Instant::now();
    let dim = instance.dim();
    let configured = match cfg.instance {
        InstanceConfig::RandomSphere { dim, .. } => Some(dim),
        InstanceConfig::Hard { .. } => Some(2),
        _ => None,
    };
    if let Some(c) = configured.filter(|&c| c != dim) {
        return Err(Error::Config(format!("config has dim {c} but the instance has dimension {dim}")));
    }
    let mut learner = match cfg.algorithm {
        Algorithm::UpacOful => BanditLearner::Upac(UpacOful::new(dim, cfg.lambda, cfg.delta)?),
        Algorithm::Oful => BanditLearner::Oful(Oful::new(
            dim,
            OfulConfig {
                lambda: cfg.lambda,
                delta: cfg.delta,
                unit_ball: cfg.unit_ball,
                tie_break: cfg.tie_break,
                seed: cfg.seed,
            },
        )?),
        other => return Err(Error::Config(format!("{} is not a bandit algorithm", other.id()))),
    };
    let eps_grid = grid_or_default(cfg, 1.0);
    let t = cfg.budget as usize;
    let mut gaps = Vec::with_capacity(t);
    let mut levels = Vec::with_capacity(t);
    let mut rewards = Vec::with_capacity(t);
    let mut trace = Vec::new();
    let mut diag = Diagnostics::default();

    for k in 1..=cfg.budget {
        let set = instance.decision_set(k);
        let idx = learner.agent().select(k, &set)?;
        let x = &set[idx];
        let gap = instance.gap(&set, x);
        if gap < GAP_FLOOR {
            return Err(Error::InvariantBreach(format!("round {k}: negative gap {gap}")));
        }
        let reward = instance.reward(k, x);
        let level = learner.agent().observe(k, x, reward)?;
        if let BanditLearner::Upac(agent) = &learner {
            let count = agent.occupancy()[level - 1];
            let cap = level_capacity(dim, level);
            if count as f64 > cap {
                return Err(Error::InvariantBreach(format!(
                    "round {k}: level {level} holds {count} rounds, capacity {cap}"
                )));
            }
            let margin = agent.coverage_margin(instance.mu_star());
            diag.min_coverage_margin = Some(diag.min_coverage_margin.map_or(margin, |m: f64| m.min(margin)));
            if margin < 0.0 {
                diag.coverage_violations += 1;
            }
            diag.max_total_level = diag.max_total_level.max(agent.total_level());
        }
        gaps.push(gap.max(0.0));
        levels.push(level);
        rewards.push(reward);
        if k % cfg.flush_every == 0 || k == cfg.budget {
            trace.push(snapshot(k, vec![learner.agent().occupancy()]));
        }
    }

    let occupancy = vec![learner.agent().occupancy()];
    let occupancy_caps = matches!(learner, BanditLearner::Upac(_)).then(|| {
        vec![(1..=occupancy[0].len()).map(|l| level_capacity(dim, l)).collect()]
    });
    let n_eps = n_epsilon_curve(&gaps, &eps_grid)?;
    Ok(RunMetrics {
        config: cfg.clone(),
        dim,
        horizon: None,
        eps_grid,
        regret: cumulative(&gaps),
        gaps,
        levels,
        rewards,
        n_eps,
        occupancy,
        occupancy_caps,
        weight_norms: None,
        weight_caps: None,
        occupancy_trace: trace,
        diagnostics: diag,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

enum MdpLearner {
    Flute(FluteAgent),
    Lsvi(LsviUcb),
}

impl MdpLearner {
    fn agent(&mut self) -> &mut dyn EpisodicAgent {
        match self {
            MdpLearner::Flute(a) => a,
            MdpLearner::Lsvi(a) => a,
        }
    }

    fn view(&self) -> &dyn EpisodicAgent {
        match self {
            MdpLearner::Flute(a) => a,
            MdpLearner::Lsvi(a) => a,
        }
    }
}

pub fn run_mdp_on(cfg: &RunConfig, spec: &LinearMdpSpec) -> Result<RunMetrics> {
    let start = Instant::now();
    let (dim, horizon) = (spec.dim(), spec.horizon());
    let configured = match cfg.instance {
        InstanceConfig::TabularRandom { states, actions, horizon } => Some((states, actions, horizon, states * actions)),
        InstanceConfig::SimplexRandom { states, actions, horizon, dim } => Some((states, actions, horizon, dim)),
        _ => None,
    };
    let actual = (spec.num_states(), spec.num_actions(), horizon, dim);
    if let Some(c) = configured.filter(|&c| c != actual) {
        return Err(Error::Config(format!(
            "config expects (states, actions, horizon, dim) = {c:?} but the instance has {actual:?}"
        )));
    }
    let fc = FluteConfig {
        lambda: cfg.lambda,
        delta: cfg.delta,
        c_beta: cfg.c_beta,
    };
    let mut learner = match cfg.algorithm {
        Algorithm::Flute => MdpLearner::Flute(FluteAgent::for_spec(spec, fc)?),
        Algorithm::LsviUcb => MdpLearner::Lsvi(LsviUcb::for_spec(spec, fc)?),
        other => return Err(Error::Config(format!("{} is not an mdp algorithm", other.id()))),
    };
    let eps_grid = grid_or_default(cfg, horizon as f64);
    let optimal = exact_optimal_values(spec);
    let s1 = spec.initial_state();
    let v_star = optimal.initial_value(s1);
    let mut rng = rng::stream(cfg.seed, domain::TRANSITION, 0);
    let k_max = cfg.budget as usize;
    let mut gaps = Vec::with_capacity(k_max);
    let mut levels = Vec::with_capacity(k_max);
    let mut rewards = Vec::with_capacity(k_max);
    let mut trace = Vec::new();
    let mut diag = Diagnostics::default();
    let multilevel = matches!(learner, MdpLearner::Flute(_));

    for k in 1..=cfg.budget {
        let record = learner.agent().run_episode(spec, &mut rng)?;
        let margin = learner.view().optimism_margin(&optimal);
        diag.min_optimism_margin = Some(diag.min_optimism_margin.map_or(margin, |m: f64| m.min(margin)));
        if margin < -1e-9 {
            diag.optimism_violations += 1;
        }
        let gap = v_star - evaluate_policy(spec, &record.policy).initial_value(s1);
        if gap < GAP_FLOOR {
            return Err(Error::InvariantBreach(format!("episode {k}: negative gap {gap}")));
        }
        if multilevel {
            check_mdp_caps(k, &*learner.view(), dim, horizon, cfg.lambda)?;
        }
        if let MdpLearner::Flute(agent) = &learner {
            diag.max_total_level = diag.max_total_level.max(agent.total_level());
        }
        gaps.push(gap.max(0.0));
        levels.push(record.levels[0]);
        rewards.push(record.total_return);
        if k % cfg.flush_every == 0 || k == cfg.budget {
            trace.push(snapshot(k, learner.view().occupancy()));
        }
    }
    if let MdpLearner::Flute(agent) = &learner {
        diag.deep_stage_events = agent.deep_stage_events();
    }

    let occupancy = learner.view().occupancy();
    let weight_norms = learner.view().max_weight_norms();
    let (occupancy_caps, weight_caps) = if multilevel {
        let caps = |f: &dyn Fn(usize, usize) -> f64, shape: &Vec<Vec<usize>>| -> Vec<Vec<f64>> {
            shape
                .iter()
                .enumerate()
                .map(|(h, st)| (1..=st.len()).map(|l| f(h, l)).collect())
                .collect()
        };
        let wshape: Vec<Vec<usize>> = weight_norms.iter().map(|st| vec![0; st.len()]).collect();
        (
            Some(caps(&|h, l| stage_level_capacity(dim, l, h + 1), &occupancy)),
            Some(caps(&|_, l| weight_norm_bound(dim, l, horizon, cfg.lambda), &wshape)),
        )
    } else {
        (None, None)
    };
    let n_eps = n_epsilon_curve(&gaps, &eps_grid)?;
    Ok(RunMetrics {
        config: cfg.clone(),
        dim,
        horizon: Some(horizon),
        eps_grid,
        regret: cumulative(&gaps),
        gaps,
        levels,
        rewards,
        n_eps,
        occupancy,
        occupancy_caps,
        weight_norms: Some(weight_norms),
        weight_caps,
        occupancy_trace: trace,
        diagnostics: diag,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn check_mdp_caps(k: u64, agent: &dyn EpisodicAgent, dim: usize, horizon: usize, lambda: f64) -> Result<()> {
    for (h, stage) in agent.occupancy().iter().enumerate() {
        for (i, &count) in stage.iter().enumerate() {
            let cap = stage_level_capacity(dim, i + 1, h + 1);
            if count as f64 > cap {
                return Err(Error::InvariantBreach(format!(
                    "episode {k}: stage {} level {} holds {count} samples, capacity {cap}",
                    h + 1,
                    i + 1
                )));
            }
        }
    }
    for (h, stage) in agent.max_weight_norms().iter().enumerate() {
        for (i, &norm) in stage.iter().enumerate() {
            let cap = weight_norm_bound(dim, i + 1, horizon, lambda);
            if norm > cap {
                return Err(Error::InvariantBreach(format!(
                    "episode {k}: stage {} level {} weight norm {norm} exceeds {cap}",
                    h + 1,
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

fn grid_or_default(cfg: &RunConfig, scale: f64) -> Vec<f64> {
    if cfg.eps_grid.is_empty() {
        default_eps_grid(scale)
    } else {
        cfg.eps_grid.clone()
    }
}
