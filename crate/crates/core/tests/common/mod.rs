#![allow(dead_code)]

use upacrl::harness::RunConfig;

pub fn config(lines: &[&str]) -> RunConfig {
    RunConfig::from_toml(&lines.join("\n")).expect("test configs are valid")
}

/// Least-squares slope of `ln R_t` on `ln t` over `t in [T/10, T]`.
/// Zero regret counts as slope 0.
pub fn final_decade_slope(regret: &[f64]) -> f64 {
    let t_max = regret.len();
    let pts: Vec<(f64, f64)> = (t_max / 10..=t_max)
        .filter(|&t| t >= 1 && regret[t - 1] > 0.0)
        .map(|t| ((t as f64).ln(), regret[t - 1].ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
