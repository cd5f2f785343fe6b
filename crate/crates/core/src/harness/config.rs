//! Run configuration.
//!
//! Config files are TOML restricted to flat `key = value` pairs. Keys may sit
//! at the top level or inside a `[bandit]` / `[mdp]` section; a section only
//! applies when `track` selects it. A `[sweep]` section maps keys to arrays
//! of values and is read by the sweep driver only. `--set key=value`
//! overrides are applied after the file. Unknown keys are errors.
//!
//! | key            | meaning                                              | default              |
//! |----------------|------------------------------------------------------|----------------------|
//! | `track`        | `bandit` or `mdp`                                    | required             |
//! | `algorithm`    | `upac-oful`, `oful` / `flute`, `lsvi-ucb`            | required             |
//! | `instance`     | `random-sphere`, `hard`, `file` / `tabular-random`, `simplex-random`, `file` | `random-sphere` / `tabular-random` |
//! | `rounds`       | bandit budget `T`                                    | 10000                |
//! | `episodes`     | MDP budget `K`                                       | 1000                 |
//! | `delta`        | confidence level, in `(0,1)`                         | 0.05                 |
//! | `lambda`       | ridge regularizer                                    | 1.0                  |
//! | `c_beta`       | MDP radius constant, number or `"theory"`            | 1.0                  |
//! | `seed`         | run seed                                             | 0                    |
//! | `instance_seed`| seed for random instances                            | `seed`               |
//! | `eps_grid`     | descending positive thresholds for `N_eps`           | `2^-i` / `H 2^-i`, i = 1..10 |
//! | `out`          | output directory                                     | `$UPACRL_OUT` or `runs` |
//! | `flush_every`  | occupancy snapshot cadence (rounds/episodes)         | 1000                 |
//! | `dim`          | bandit dimension / simplex feature dimension         | 5 / 3                |
//! | `arms`         | actions per round for `random-sphere`                | 10                   |
//! | `noise`        | `gaussian`, `uniform` or `zero`                      | `gaussian`           |
//! | `noise_scale`  | Gaussian sd or uniform half-width                    | 1.0                  |
//! | `hard_k`       | phase-one length of the hard instance                | 256                  |
//! | `unit_ball`    | OFUL: intersect the ellipsoid with the unit ball     | false                |
//! | `tie_break`    | OFUL: `lowest` or `random`                           | `lowest`             |
//! | `states`, `actions`, `horizon` | MDP sizes                            | 3, 2, 3              |
//! | `instance_path`| JSON instance for `instance = "file"`                | none                 |

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::bandit::{NoiseModel, TieBreak};
use crate::mdp::THEORY_C_BETA;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Bandit,
    Mdp,
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::Bandit => "bandit",
            Track::Mdp => "mdp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    #[serde(rename = "upac-oful")]
    UpacOful,
    #[serde(rename = "oful")]
    Oful,
    #[serde(rename = "flute")]
    Flute,
    #[serde(rename = "lsvi-ucb")]
    LsviUcb,
}

impl Algorithm {
    pub const BANDIT: [&'static str; 2] = ["upac-oful", "oful"];
    pub const MDP: [&'static str; 2] = ["flute", "lsvi-ucb"];

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::UpacOful => "upac-oful",
            Algorithm::Oful => "oful",
            Algorithm::Flute => "flute",
            Algorithm::LsviUcb => "lsvi-ucb",
        }
    }

    /// Whether the learner keeps a multi-level partition with capacity caps.
    pub fn is_multilevel(&self) -> bool {
        matches!(self, Algorithm::UpacOful | Algorithm::Flute)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceConfig {
    RandomSphere { dim: usize, arms: usize },
    Hard { hard_k: usize },
    BanditFile { path: PathBuf },
    TabularRandom { states: usize, actions: usize, horizon: usize },
    SimplexRandom { states: usize, actions: usize, horizon: usize, dim: usize },
    MdpFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub track: Track,
    pub algorithm: Algorithm,
    pub instance: InstanceConfig,
    /// `T` for bandits, `K` for MDPs.
    pub budget: u64,
    pub delta: f64,
    pub lambda: f64,
    pub c_beta: f64,
    pub seed: u64,
    pub instance_seed: u64,
    pub eps_grid: Vec<f64>,
    pub out: Option<PathBuf>,
    pub flush_every: u64,
    pub noise: NoiseModel,
    pub unit_ball: bool,
    pub tie_break: TieBreak,
}

const KNOWN_KEYS: &[&str] = &[
    "track",
    "algorithm",
    "instance",
    "rounds",
    "episodes",
    "delta",
    "lambda",
    "c_beta",
    "seed",
    "instance_seed",
    "eps_grid",
    "out",
    "flush_every",
    "dim",
    "arms",
    "noise",
    "noise_scale",
    "hard_k",
    "unit_ball",
    "tie_break",
    "states",
    "actions",
    "horizon",
    "instance_path",
];

/// Raw key-value view of a config file after section resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, toml::Value>,
    /// `[sweep]` grid: key -> candidate values.
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        let mut map = ConfigMap::default();
        let mut sections: BTreeMap<String, toml::Table> = BTreeMap::new();
        for (key, value) in table {
            match value {
                toml::Value::Table(t) => match key.as_str() {
                    "bandit" | "mdp" => {
                        sections.insert(key, t);
                    }
                    "sweep" => {
                        for (k, v) in t {
                            check_key(&k)?;
                            let vals = match v {
                                toml::Value::Array(a) if !a.is_empty() => a,
                                _ => {
                                    return Err(Error::Config(format!(
                                        "sweep.{k} must be a nonempty array"
                                    )))
                                }
                            };
                            map.sweep.insert(k, vals);
                        }
                    }
                    _ => return Err(Error::Config(format!("unknown section [{key}]"))),
                },
                other => {
                    check_key(&key)?;
                    map.values.insert(key, other);
                }
            }
        }
        let track = map.values.get("track").and_then(|v| v.as_str()).map(str::to_owned);
        for (name, t) in sections {
            for (k, v) in t {
                check_key(&k)?;
                if track.as_deref() == Some(name.as_str()) {
                    map.values.insert(k, v);
                }
            }
        }
        Ok(map)
    }

    /// Applies a `key=value` override; the value is read as a TOML value and
    /// falls back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        check_key(key)?;
        self.insert(key, parse_value(raw.trim()));
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: toml::Value) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&toml::Value> {
        self.values.get(key)
    }

    pub fn to_run_config(&self) -> Result<RunConfig> {
        RunConfig::from_map(self)
    }
}

pub fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    toml::from_str::<toml::Table>(&doc)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown key `{key}`")))
    }
}

fn bad(key: &str, why: impl fmt::Display) -> Error {
    Error::Config(format!("bad value for `{key}`: {why}"))
}

struct Reader<'a>(&'a ConfigMap);

impl Reader<'_> {
    fn str(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(bad(key, format!("expected a string, got {v}"))),
        }
    }

    fn float(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(f)) => Ok(*f),
            Some(toml::Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(bad(key, format!("expected a number, got {v}"))),
        }
    }

    fn uint(&self, key: &str, default: u64) -> Result<u64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(bad(key, format!("expected true/false, got {v}"))),
        }
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(bad(key, format!("non-numeric entry {other}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(bad(key, format!("expected an array, got {v}"))),
        }
    }
}

/// `scale * 2^-i` for `i = 1..=10`.
pub fn default_eps_grid(scale: f64) -> Vec<f64> {
    (1..=10).map(|i| scale * 0.5f64.powi(i)).collect()
}

impl RunConfig {
    fn from_map(map: &ConfigMap) -> Result<Self> {
        let r = Reader(map);
        let track = match r.str("track")?.as_deref() {
            Some("bandit") => Track::Bandit,
            Some("mdp") => Track::Mdp,
            Some(other) => return Err(bad("track", format!("`{other}`; valid tracks: bandit, mdp"))),
            None => return Err(Error::Config("missing key `track`".into())),
        };
        let valid = match track {
            Track::Bandit => Algorithm::BANDIT,
            Track::Mdp => Algorithm::MDP,
        };
        let algorithm = match r.str("algorithm")?.as_deref() {
            Some("upac-oful") if track == Track::Bandit => Algorithm::UpacOful,
            Some("oful") if track == Track::Bandit => Algorithm::Oful,
            Some("flute") if track == Track::Mdp => Algorithm::Flute,
            Some("lsvi-ucb") if track == Track::Mdp => Algorithm::LsviUcb,
            Some(other) => {
                return Err(bad(
                    "algorithm",
                    format!("unknown algorithm `{other}` for track {track}; valid ids: {}", valid.join(", ")),
                ))
            }
            None => {
                return Err(Error::Config(format!(
                    "missing key `algorithm`; valid ids: {}",
                    valid.join(", ")
                )))
            }
        };

        let (budget_key, wrong_key, default_budget) = match track {
            Track::Bandit => ("rounds", "episodes", 10_000),
            Track::Mdp => ("episodes", "rounds", 1_000),
        };
        if map.get(wrong_key).is_some() {
            return Err(bad(wrong_key, format!("not used by track {track}; use `{budget_key}`")));
        }
        let budget = r.uint(budget_key, default_budget)?;
        if budget == 0 {
            return Err(bad(budget_key, "budget must be at least 1"));
        }

        let delta = r.float("delta", 0.05)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(bad("delta", format!("{delta} is outside (0,1)")));
        }
        let lambda = r.float("lambda", 1.0)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(bad("lambda", format!("{lambda} must be positive")));
        }
        let c_beta = match map.get("c_beta") {
            Some(toml::Value::String(s)) if s == "theory" => THEORY_C_BETA,
            _ => r.float("c_beta", 1.0)?,
        };
        if !(c_beta >= 0.0) || !c_beta.is_finite() {
            return Err(bad("c_beta", format!("{c_beta} must be nonnegative")));
        }
        let seed = r.uint("seed", 0)?;
        let instance_seed = r.uint("instance_seed", seed)?;
        let flush_every = r.uint("flush_every", 1000)?.max(1);

        let instance_name = r.str("instance")?;
        let path = r.str("instance_path")?.map(PathBuf::from);
        let instance = match track {
            Track::Bandit => match instance_name.as_deref().unwrap_or("random-sphere") {
                "random-sphere" => InstanceConfig::RandomSphere {
                    dim: positive(r.uint("dim", 5)?, "dim")?,
                    arms: positive(r.uint("arms", 10)?, "arms")?,
                },
                "hard" => {
                    let k = r.uint("hard_k", 256)?;
                    if k < 2 {
                        return Err(bad("hard_k", "the hard instance needs hard_k >= 2"));
                    }
                    InstanceConfig::Hard { hard_k: k as usize }
                }
                "file" => InstanceConfig::BanditFile {
                    path: path.ok_or_else(|| Error::Config("instance = \"file\" needs `instance_path`".into()))?,
                },
                other => {
                    return Err(bad(
                        "instance",
                        format!("unknown bandit instance `{other}`; valid: random-sphere, hard, file"),
                    ))
                }
            },
            Track::Mdp => {
                let states = positive(r.uint("states", 3)?, "states")?;
                let actions = positive(r.uint("actions", 2)?, "actions")?;
                let horizon = positive(r.uint("horizon", 3)?, "horizon")?;
                match instance_name.as_deref().unwrap_or("tabular-random") {
                    "tabular-random" => InstanceConfig::TabularRandom { states, actions, horizon },
                    "simplex-random" => InstanceConfig::SimplexRandom {
                        states,
                        actions,
                        horizon,
                        dim: positive(r.uint("dim", 3)?, "dim")?,
                    },
                    "file" => InstanceConfig::MdpFile {
                        path: path
                            .ok_or_else(|| Error::Config("instance = \"file\" needs `instance_path`".into()))?,
                    },
                    other => {
                        return Err(bad(
                            "instance",
                            format!("unknown mdp instance `{other}`; valid: tabular-random, simplex-random, file"),
                        ))
                    }
                }
            }
        };

        let eps_grid = match r.float_list("eps_grid")? {
            Some(g) => g,
            None => match (&instance, track) {
                (_, Track::Bandit) => default_eps_grid(1.0),
                (InstanceConfig::TabularRandom { horizon, .. }, _)
                | (InstanceConfig::SimplexRandom { horizon, .. }, _) => default_eps_grid(*horizon as f64),
                // horizon of file instances is only known after loading
                _ => Vec::new(),
            },
        };
        validate_grid(&eps_grid, matches!(instance, InstanceConfig::MdpFile { .. }))?;

        let noise_scale = r.float("noise_scale", 1.0)?;
        if !(noise_scale >= 0.0) {
            return Err(bad("noise_scale", "must be nonnegative"));
        }
        let noise = match r.str("noise")?.as_deref() {
            None | Some("gaussian") => NoiseModel::Gaussian { sd: noise_scale },
            Some("uniform") => NoiseModel::Uniform {
                half_width: noise_scale,
            },
            Some("zero") => NoiseModel::Zero,
            Some(other) => return Err(bad("noise", format!("`{other}`; valid: gaussian, uniform, zero"))),
        };
        let tie_break = match r.str("tie_break")?.as_deref() {
            None | Some("lowest") => TieBreak::Lowest,
            Some("random") => TieBreak::Random,
            Some(other) => return Err(bad("tie_break", format!("`{other}`; valid: lowest, random"))),
        };
        let unit_ball = r.bool("unit_ball", false)?;
        let out = r.str("out")?.map(PathBuf::from);

        Ok(Self {
            track,
            algorithm,
            instance,
            budget,
            delta,
            lambda,
            c_beta,
            seed,
            instance_seed,
            eps_grid,
            out,
            flush_every,
            noise,
            unit_ball,
            tie_break,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigMap::parse(text)?.to_run_config()
    }
}

fn positive(v: u64, key: &str) -> Result<usize> {
    if v == 0 {
        Err(bad(key, "must be at least 1"))
    } else {
        Ok(v as usize)
    }
}

pub(crate) fn validate_grid(grid: &[f64], allow_empty: bool) -> Result<()> {
    if grid.is_empty() {
        return if allow_empty {
            Ok(())
        } else {
            Err(bad("eps_grid", "grid is empty"))
        };
    }
    if grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(bad("eps_grid", "entries must be positive"));
    }
    if grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(bad("eps_grid", "entries must be strictly descending"));
    }
    Ok(())
}
