//! Offline re-checking of run artifacts.
//!
//! Nothing in `summary.json` is trusted: capacities are recomputed from the
//! recorded dimension and horizon, and `N_eps` and regret are recounted from
//! the gap column.

use std::path::Path;

use super::output::{read_results_csv, Summary, RESULTS_FILE, SUMMARY_FILE};
use crate::bandit::level_capacity;
use crate::mdp::{stage_level_capacity, weight_norm_bound, CheckResult};
use crate::Result;

const REL_TOL: f64 = 1e-9;

fn check(name: &str, fault: Option<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: fault.is_none(),
        detail: fault.unwrap_or_else(|| "ok".into()),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Audits the run directory `dir`. Unreadable artifacts are an error; every
/// other problem is reported as a failed check.
pub fn audit_run(dir: &Path) -> Result<Vec<CheckResult>> {
    let table = read_results_csv(&dir.join(RESULTS_FILE))?;
    let summary = Summary::read(&dir.join(SUMMARY_FILE))?;
    let rows = &table.rows;
    let mut out = Vec::new();

    out.push(check(
        "row-index",
        rows.iter()
            .enumerate()
            .find(|(k, r)| r.index != *k as u64 + 1)
            .map(|(k, r)| format!("row {} has index {}", k + 1, r.index))
            .or_else(|| {
                (rows.len() as u64 != summary.budget)
                    .then(|| format!("{} rows for a budget of {}", rows.len(), summary.budget))
            }),
    ));

    out.push(check(
        "gap-nonnegative",
        rows.iter()
            .find(|r| !(r.gap >= 0.0))
            .map(|r| format!("index {}: gap {}", r.index, r.gap)),
    ));

    let mut prev = 0.0;
    let mut regret_fault = None;
    for r in rows {
        if regret_fault.is_none() && !close(r.regret, prev + r.gap) {
            regret_fault = Some(format!(
                "index {}: regret {} but previous regret {prev} + gap {} = {}",
                r.index,
                r.regret,
                r.gap,
                prev + r.gap
            ));
        }
        prev = r.regret;
    }
    out.push(check("regret-consistency", regret_fault));

    let grid_fault = (table.eps_grid != summary.eps_grid)
        .then(|| format!("csv grid {:?} != summary grid {:?}", table.eps_grid, summary.eps_grid))
        .or_else(|| {
            table
                .eps_grid
                .windows(2)
                .any(|w| w[0] <= w[1])
                .then(|| "epsilon grid is not strictly descending".to_string())
        });
    out.push(check("eps-grid", grid_fault));

    let mut monotone_fault = None;
    let mut recount_fault = None;
    let mut counts = vec![0u64; table.eps_grid.len()];
    let mut last = vec![0u64; table.eps_grid.len()];
    for r in rows {
        if r.n_eps.len() != counts.len() {
            recount_fault.get_or_insert(format!("index {}: {} counts", r.index, r.n_eps.len()));
            continue;
        }
        for (c, &eps) in counts.iter_mut().zip(&table.eps_grid) {
            if r.gap > eps {
                *c += 1;
            }
        }
        if monotone_fault.is_none() {
            if let Some(j) = (0..counts.len()).find(|&j| r.n_eps[j] < last[j]) {
                monotone_fault = Some(format!("index {}: N_eps[{}] decreased", r.index, table.eps_grid[j]));
            } else if r.n_eps.windows(2).any(|w| w[0] > w[1]) {
                monotone_fault = Some(format!("index {}: counts not monotone in eps", r.index));
            }
        }
        if recount_fault.is_none() && r.n_eps != counts {
            recount_fault = Some(format!("index {}: recorded {:?}, recount {:?}", r.index, r.n_eps, counts));
        }
        last.clone_from(&r.n_eps);
    }
    out.push(check("n-eps-monotone", monotone_fault));
    out.push(check("n-eps-recount", recount_fault));

    let final_regret = rows.last().map_or(0.0, |r| r.regret);
    let summary_fault = if !close(summary.final_regret, final_regret) {
        Some(format!("final regret {} != last row {final_regret}", summary.final_regret))
    } else if summary.final_n_eps != rows.last().map_or_else(|| vec![0; counts.len()], |r| r.n_eps.clone()) {
        Some("final N_eps differs from last row".into())
    } else {
        None
    };
    out.push(check("summary-consistency", summary_fault));

    let multilevel = matches!(summary.algorithm.as_str(), "upac-oful" | "flute");
    let horizon = summary.horizon;
    let mut cap_fault = None;
    let mut stage_totals: Vec<u64> = Vec::new();
    for e in &summary.occupancy {
        if e.stage == 0 || e.level == 0 {
            cap_fault.get_or_insert(format!("stage {} level {}: indices are 1-based", e.stage, e.level));
            continue;
        }
        if stage_totals.len() < e.stage {
            stage_totals.resize(e.stage, 0);
        }
        stage_totals[e.stage - 1] += e.count as u64;
        if multilevel {
            let cap = match horizon {
                Some(_) => stage_level_capacity(summary.dim, e.level, e.stage),
                None => level_capacity(summary.dim, e.level),
            };
            if e.count as f64 > cap && cap_fault.is_none() {
                cap_fault = Some(format!(
                    "stage {} level {}: {} samples exceed capacity {cap}",
                    e.stage, e.level, e.count
                ));
            }
        }
    }
    out.push(check("level-capacity", cap_fault));
    out.push(check(
        "partition-size",
        stage_totals
            .iter()
            .position(|&t| t != summary.budget)
            .map(|h| format!("stage {} levels hold {} samples, expected {}", h + 1, stage_totals[h], summary.budget)),
    ));

    let lambda = summary.config.get("lambda").and_then(|v| v.as_f64());
    let mut weight_fault = None;
    if summary.algorithm == "flute" {
        match (horizon, lambda) {
            (Some(h), Some(lambda)) => {
                for e in &summary.weight_norms {
                    let cap = weight_norm_bound(summary.dim, e.level, h, lambda);
                    if !(e.max_norm <= cap) && weight_fault.is_none() {
                        weight_fault = Some(format!(
                            "stage {} level {}: weight norm {} exceeds {cap}",
                            e.stage, e.level, e.max_norm
                        ));
                    }
                }
            }
            _ => weight_fault = Some("summary lacks horizon or lambda".into()),
        }
    }
    out.push(check("weight-norm-capacity", weight_fault));
    Ok(out)
}
