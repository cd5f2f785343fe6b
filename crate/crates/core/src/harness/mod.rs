//! Experiment harness: configuration, runs with exact gaps, artifacts,
//! audits and sweeps.

pub mod audit;
pub mod config;
pub mod instance;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod sweep;

pub use audit::audit_run;
pub use config::{default_eps_grid, Algorithm, ConfigMap, InstanceConfig, RunConfig, Track};
pub use instance::{
    build_bandit_instance, build_mdp_spec, certify_bandit_instance, BanditFile, InstanceFile, TabularMdpFile,
};
pub use metrics::{cumulative, n_epsilon_curve, Diagnostics, RunMetrics};
pub use output::{read_results_csv, write_run, Summary, RESULTS_FILE, SUMMARY_FILE};
pub use runner::{run_bandit_on, run_experiment, run_mdp_on};
pub use sweep::{expand, parse_seed_range, run_sweep, Manifest};
