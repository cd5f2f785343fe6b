//! `upacrl` command-line driver.
//!
//! Exit codes: 0 success, 1 failed sweep cell or other error, 2 bad
//! configuration, 3 runtime invariant breach, 4 certification failure,
//! 5 audit failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use upacrl::harness::{
    self, audit_run, build_bandit_instance, build_mdp_spec, certify_bandit_instance, expand, parse_seed_range,
    run_experiment, run_sweep, write_run, ConfigMap, InstanceFile, RunConfig, Track,
};
use upacrl::mdp::CheckResult;
use upacrl::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_CERTIFY: u8 = 4;
const EXIT_AUDIT: u8 = 5;

/// Rounds checked when certifying a generated bandit instance.
const CERTIFY_ROUNDS: u64 = 1000;

#[derive(Parser)]
#[command(name = "upacrl", version, about = "Uniform-PAC linear bandit and linear MDP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set c_beta=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment and write results.csv and summary.json.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for this run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seed range times the config's [sweep] grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Half-open seed range `a..b` or a single seed.
        #[arg(long, default_value = "0..1")]
        seeds: String,
        /// Sweep root directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check that an instance satisfies the model assumptions.
    Certify {
        /// Instance JSON file (kind: linear_mdp, tabular_mdp or bandit).
        #[arg(long, conflicts_with = "config")]
        instance: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-check a run directory's artifacts.
    Audit {
        /// Run directory containing results.csv and summary.json.
        dir: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::InvariantBreach(_) => EXIT_INVARIANT,
        Error::Certification(_) => EXIT_CERTIFY,
        _ => EXIT_FAILURE,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn load_map(args: &ConfigArgs) -> Result<ConfigMap, Error> {
    let mut map = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ConfigMap::parse(&text)?
        }
        None => ConfigMap::default(),
    };
    for s in &args.set {
        map.set(s)?;
    }
    Ok(map)
}

fn out_root(cfg: &RunConfig, cli_out: Option<PathBuf>) -> Option<PathBuf> {
    cli_out.or_else(|| cfg.out.clone())
}

fn cmd_run(args: &ConfigArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Error> {
    let mut map = load_map(args)?;
    if let Some(seed) = seed {
        map.set(&format!("seed={seed}"))?;
    }
    let cfg = map.to_run_config()?;
    let dir = out_root(&cfg, out).unwrap_or_else(|| {
        harness::output::default_out_root().join(format!("{}-{}-seed{}", cfg.track, cfg.algorithm.id(), cfg.seed))
    });
    let metrics = run_experiment(&cfg)?;
    write_run(&dir, &metrics)?;
    let smallest = metrics.eps_grid.last().copied().unwrap_or(f64::NAN);
    let n_smallest = metrics.final_n_eps().last().copied().unwrap_or(0);
    let max_level = metrics.levels.iter().copied().max().unwrap_or(0);
    println!(
        "{} {} seed {}: {} {}, final regret {:.6}, N_eps({smallest}) = {n_smallest}, max level {max_level}, {:.2}s -> {}",
        cfg.track,
        cfg.algorithm.id(),
        cfg.seed,
        cfg.budget,
        if cfg.track == Track::Bandit { "rounds" } else { "episodes" },
        metrics.final_regret(),
        metrics.runtime_secs,
        dir.display()
    );
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs, seeds: &str, out: Option<PathBuf>, jobs: Option<usize>) -> Result<ExitCode, Error> {
    let map = load_map(args)?;
    let seeds = parse_seed_range(seeds)?;
    let cells = expand(&map, &seeds)?;
    let first = &cells.first().ok_or_else(|| Error::Config("sweep has no cells".into()))?.config;
    let root = out_root(first, out).unwrap_or_else(|| {
        harness::output::default_out_root().join(format!("sweep-{}-{}", first.track, first.algorithm.id()))
    });
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let manifest = run_sweep(&cells, &root, jobs)?;
    for c in &manifest.cells {
        match &c.error {
            None => println!(
                "cell {} seed {} ok: final regret {:.6}",
                c.index,
                c.seed,
                c.final_regret.unwrap_or(f64::NAN)
            ),
            Some(e) => println!("cell {} seed {} FAILED: {e}", c.index, c.seed),
        }
    }
    println!("{} cells, {} failed -> {}", manifest.cells.len(), manifest.failed(), root.display());
    Ok(if manifest.failed() > 0 {
        ExitCode::from(EXIT_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn report(checks: &[CheckResult]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn cmd_certify(instance: Option<&Path>, args: &ConfigArgs) -> Result<ExitCode, Error> {
    let checks = match instance {
        Some(path) => InstanceFile::read(path)?.certify()?,
        None => {
            let cfg = load_map(args)?.to_run_config()?;
            match cfg.track {
                Track::Bandit => {
                    let inst = build_bandit_instance(&cfg)?;
                    certify_bandit_instance(&inst, cfg.budget.min(CERTIFY_ROUNDS))
                }
                Track::Mdp => build_mdp_spec(&cfg)?.certify(),
            }
        }
    };
    if report(&checks) {
        println!("certified");
        Ok(ExitCode::SUCCESS)
    } else {
        let first = checks.iter().find(|c| !c.passed).expect("some check failed");
        eprintln!("error: certification failed: {}: {}", first.name, first.detail);
        Ok(ExitCode::from(EXIT_CERTIFY))
    }
}

fn cmd_audit(dir: &Path) -> Result<ExitCode, Error> {
    let checks = match audit_run(dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: audit failed: {e}");
            return Ok(ExitCode::from(EXIT_AUDIT));
        }
    };
    if report(&checks) {
        println!("audit passed");
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        eprintln!("error: audit failed: {}", failed.join(", "));
        Ok(ExitCode::from(EXIT_AUDIT))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out).map(|_| ExitCode::SUCCESS),
        Command::Sweep {
            config,
            seeds,
            out,
            jobs,
        } => cmd_sweep(&config, &seeds, out, jobs),
        Command::Certify { instance, config } => cmd_certify(instance.as_deref(), &config),
        Command::Audit { dir } => cmd_audit(&dir),
    };
    result.unwrap_or_else(fail)
}
