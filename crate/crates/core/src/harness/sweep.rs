//! Seed x parameter-grid sweeps.
//!
//! Every cell writes its own run directory under the sweep root and the
//! sweep writes `manifest.json` listing the cells in a fixed order, so the
//! directory contents depend only on the configuration (apart from the
//! wall-clock field of each summary), never on the number of workers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{ConfigMap, RunConfig};
use super::output::write_run;
use super::runner::run_experiment;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    pub seed: u64,
    pub overrides: BTreeMap<String, toml::Value>,
    pub dir: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub seed: u64,
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub dir: String,
    pub status: String,
    pub error: Option<String>,
    pub final_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status != "ok").count()
    }
}

/// Parses `a..b` (half-open) or a single seed.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed range `{text}`; expected a..b or a single seed"));
    match text.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b <= a {
                return Err(bad());
            }
            Ok((a..b).collect())
        }
        None => Ok(vec![text.trim().parse().map_err(|_| bad())?]),
    }
}

fn toml_to_json(v: &toml::Value) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

/// Expands the `[sweep]` grid (cartesian product, keys in sorted order) for
/// every seed. Seeds vary slowest.
pub fn expand(map: &ConfigMap, seeds: &[u64]) -> Result<Vec<SweepCell>> {
    let keys: Vec<&String> = map.sweep.keys().collect();
    let mut combos: Vec<BTreeMap<String, toml::Value>> = vec![BTreeMap::new()];
    for key in &keys {
        let mut next = Vec::new();
        for combo in &combos {
            for v in &map.sweep[*key] {
                let mut c = combo.clone();
                c.insert((*key).clone(), v.clone());
                next.push(c);
            }
        }
        combos = next;
    }
    let mut cells = Vec::new();
    for &seed in seeds {
        for combo in &combos {
            let mut m = map.clone();
            m.insert("seed", toml::Value::Integer(seed as i64));
            for (k, v) in combo {
                m.insert(k, v.clone());
            }
            let config = m.to_run_config()?;
            let index = cells.len();
            cells.push(SweepCell {
                index,
                seed,
                overrides: combo.clone(),
                dir: format!("cell-{index:04}"),
                config,
            });
        }
    }
    Ok(cells)
}

/// Runs every cell on `jobs` worker threads and writes the manifest.
pub fn run_sweep(cells: &[SweepCell], root: &Path, jobs: usize) -> Result<Manifest> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellRecord>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let record = run_cell(cell, &root.join(&cell.dir));
                results.lock().expect("no worker panics while holding the lock")[i] = Some(record);
            });
        }
    });
    let cells_out = results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();
    let manifest = Manifest {
        schema: super::output::SCHEMA_VERSION,
        cells: cells_out,
    };
    let path = root.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn run_cell(cell: &SweepCell, dir: &PathBuf) -> CellRecord {
    let outcome = run_experiment(&cell.config).and_then(|m| write_run(dir, &m).map(|_| m.final_regret()));
    CellRecord {
        index: cell.index,
        seed: cell.seed,
        overrides: cell.overrides.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect(),
        dir: cell.dir.clone(),
        status: if outcome.is_ok() { "ok" } else { "failed" }.into(),
        error: outcome.as_ref().err().map(ToString::to_string),
        final_regret: outcome.ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_range("7").unwrap(), vec![7]);
        assert!(parse_seed_range("3..3").is_err());
        assert!(parse_seed_range("x").is_err());
    }

    #[test]
    fn grid_expands_in_fixed_order() {
        let map = ConfigMap::parse(
            "track=\"mdp\"\nalgorithm=\"flute\"\nepisodes=5\n[sweep]\nc_beta=[1.0, 16.0]\nhorizon=[2, 3]\n",
        )
        .unwrap();
        let cells = expand(&map, &[0, 1]).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[1].config.c_beta, 1.0);
        assert_eq!(cells[2].config.c_beta, 16.0);
        assert_eq!(cells[4].seed, 1);
    }

    #[test]
    fn worker_count_does_not_change_outputs() {
        let map = ConfigMap::parse(
            "track=\"bandit\"\nalgorithm=\"upac-oful\"\nrounds=60\ndim=3\n[sweep]\narms=[2, 4]\n",
        )
        .unwrap();
        let cells = expand(&map, &[0, 1, 2]).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run_sweep(&cells, a.path(), 1).unwrap();
        let mb = run_sweep(&cells, b.path(), 4).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(ma.failed(), 0);
        for c in &ma.cells {
            let ra = std::fs::read(a.path().join(&c.dir).join("results.csv")).unwrap();
            let rb = std::fs::read(b.path().join(&c.dir).join("results.csv")).unwrap();
            assert_eq!(ra, rb);
        }
    }
}
