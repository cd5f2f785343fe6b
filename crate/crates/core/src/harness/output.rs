//! Run artifacts: `results.csv` (one row per round or episode) and
//! `summary.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{Diagnostics, OccupancySnapshot, RunMetrics};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Default output root when neither `--out` nor `out` is given.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("UPACRL_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub stage: usize,
    pub level: usize,
    pub count: usize,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub stage: usize,
    pub level: usize,
    pub max_norm: f64,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: u64,
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOut {
    pub min_coverage_margin: Option<f64>,
    pub coverage_violations: u64,
    pub min_optimism_margin: Option<f64>,
    pub optimism_violations: u64,
    pub deep_stage_events: u64,
    pub max_total_level: usize,
}

impl From<&Diagnostics> for DiagnosticsOut {
    fn from(d: &Diagnostics) -> Self {
        Self {
            min_coverage_margin: d.min_coverage_margin,
            coverage_violations: d.coverage_violations,
            min_optimism_margin: d.min_optimism_margin,
            optimism_violations: d.optimism_violations,
            deep_stage_events: d.deep_stage_events,
            max_total_level: d.max_total_level,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub track: String,
    pub algorithm: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub budget: u64,
    pub dim: usize,
    pub horizon: Option<usize>,
    pub eps_grid: Vec<f64>,
    pub final_regret: f64,
    pub final_n_eps: Vec<u64>,
    pub occupancy: Vec<LevelEntry>,
    pub weight_norms: Vec<WeightEntry>,
    pub occupancy_trace: Vec<Snapshot>,
    pub diagnostics: DiagnosticsOut,
    /// Wall-clock seconds; the only field that differs between replays.
    pub runtime_secs: f64,
}

impl Summary {
    pub fn from_metrics(m: &RunMetrics) -> Self {
        let mut occupancy = Vec::new();
        for (h, stage) in m.occupancy.iter().enumerate() {
            for (i, &count) in stage.iter().enumerate() {
                occupancy.push(LevelEntry {
                    stage: h + 1,
                    level: i + 1,
                    count,
                    cap: m.occupancy_caps.as_ref().map(|c| c[h][i]),
                });
            }
        }
        let mut weight_norms = Vec::new();
        if let Some(norms) = &m.weight_norms {
            for (h, stage) in norms.iter().enumerate() {
                for (i, &max_norm) in stage.iter().enumerate() {
                    weight_norms.push(WeightEntry {
                        stage: h + 1,
                        level: i + 1,
                        max_norm,
                        cap: m.weight_caps.as_ref().map(|c| c[h][i]),
                    });
                }
            }
        }
        Self {
            schema: SCHEMA_VERSION,
            track: m.config.track.to_string(),
            algorithm: m.config.algorithm.id().to_string(),
            seed: m.config.seed,
            config: serde_json::to_value(&m.config).expect("config serializes"),
            budget: m.config.budget,
            dim: m.dim,
            horizon: m.horizon,
            eps_grid: m.eps_grid.clone(),
            final_regret: m.final_regret(),
            final_n_eps: m.final_n_eps(),
            occupancy,
            weight_norms,
            occupancy_trace: m
                .occupancy_trace
                .iter()
                .map(|OccupancySnapshot { index, counts }| Snapshot {
                    index: *index,
                    counts: counts.clone(),
                })
                .collect(),
            diagnostics: (&m.diagnostics).into(),
            runtime_secs: m.runtime_secs,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| Error::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if summary.schema != SCHEMA_VERSION {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                message: format!("unsupported schema {}", summary.schema),
            });
        }
        Ok(summary)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// One parsed row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub index: u64,
    pub gap: f64,
    pub regret: f64,
    pub level: usize,
    pub reward: f64,
    pub n_eps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub eps_grid: Vec<f64>,
    pub rows: Vec<ResultRow>,
}

fn csv_header(track: &str, eps_grid: &[f64]) -> String {
    let unit = if track == "mdp" { "episode" } else { "round" };
    let mut s = format!(
        "# schema={SCHEMA_VERSION} track={track}; index={unit} (1-based); gap=exact suboptimality gap; \
         regret=cumulative gap; level=level the {unit} was filed at; reward={}; \
         n_gt_<eps>=number of {unit}s so far with gap > eps\nindex,gap,regret,level,reward",
        if track == "mdp" { "episode return" } else { "observed reward" }
    );
    for eps in eps_grid {
        s.push_str(&format!(",n_gt_{eps}"));
    }
    s.push('\n');
    s
}

pub fn write_results_csv(path: &Path, m: &RunMetrics) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(csv_header(&m.config.track.to_string(), &m.eps_grid).as_bytes())
        .map_err(io)?;
    for k in 0..m.gaps.len() {
        write!(w, "{},{},{},{},{}", k + 1, m.gaps[k], m.regret[k], m.levels[k], m.rewards[k]).map_err(io)?;
        for n in &m.n_eps[k] {
            write!(w, ",{n}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_results_csv(path: &Path) -> Result<ResultsTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Artifact {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| bad(0, "missing header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[..5] != ["index", "gap", "regret", "level", "reward"] {
        return Err(bad(hline + 1, format!("unexpected header `{header}`")));
    }
    let eps_grid = cols[5..]
        .iter()
        .map(|c| {
            c.strip_prefix("n_gt_")
                .and_then(|e| e.parse::<f64>().ok())
                .ok_or_else(|| bad(hline + 1, format!("bad column `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(bad(i + 1, format!("expected {} fields, got {}", cols.len(), f.len())));
        }
        let num = |j: usize| f[j].parse::<f64>().map_err(|e| bad(i + 1, format!("{}: {e}", cols[j])));
        let int = |j: usize| f[j].parse::<u64>().map_err(|e| bad(i + 1, format!("{}: {e}", cols[j])));
        rows.push(ResultRow {
            index: int(0)?,
            gap: num(1)?,
            regret: num(2)?,
            level: int(3)? as usize,
            reward: num(4)?,
            n_eps: (5..f.len()).map(int).collect::<Result<Vec<_>>>()?,
        });
    }
    Ok(ResultsTable { eps_grid, rows })
}

/// Writes both artifacts into `dir`, creating it if needed.
pub fn write_run(dir: &Path, m: &RunMetrics) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results_csv(&dir.join(RESULTS_FILE), m)?;
    Summary::from_metrics(m).write(&dir.join(SUMMARY_FILE))
}
