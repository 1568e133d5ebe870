use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flexrank::config::ExperimentConfig;
use flexrank::nn::suite::{gradient_suite, DEFAULT_PROBES, TOLERANCE};
use flexrank::runner::{default_run_dir, oracle_report, run, sweep, write_sweep};

#[derive(Parser)]
#[command(name = "flexrank", version, about = "Effective-rank placement experiments for movable and pinching antennas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for this job.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "FLEXRANK_OUT", hide = true)]
    out_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train (if the algorithm learns) and evaluate one configuration.
    Run(Common),
    /// Run the config's `sweep` grid and write one table per system.
    Sweep(Common),
    /// Exhaustive search on one slot, next to greedy and random.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Random placements averaged on the same slot.
        #[arg(long, default_value_t = 200)]
        random_draws: usize,
    },
    /// Finite-difference check of every layer and both networks.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config problems exit with 2, everything else with 1.
enum Failure {
    Config(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<flexrank::Error> for Failure {
    fn from(e: flexrank::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(|e| match e {
        flexrank::Error::Config(m) => Failure::Config(m),
        other => Failure::Config(format!("{}: {other}", common.config.display())),
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| default_run_dir(&cfg, common.out_root.as_deref()));
    Ok((cfg, dir))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn execute(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, dir) = load(&common)?;
            let outcome = run(&cfg, &dir)?;
            if let Some(last) = outcome.log.last() {
                println!("episodes {}  last mean_erank {:.4}", outcome.log.len(), last.mean_erank);
            }
            println!(
                "{} {} seed {}: mean erank {:.4} (std across seeds {:.4}, across slots {:.4})",
                cfg.system, cfg.algorithm, cfg.seed, outcome.eval.mean, outcome.eval.std_across_seeds, outcome.eval.std_across_slots
            );
            println!("wrote {}", dir.display());
        }
        Command::Sweep(common) => {
            let (cfg, dir) = load(&common)?;
            if cfg.sweep.is_none() {
                return Err(Failure::Config(format!("{}: missing `sweep` section", common.config.display())));
            }
            let outcome = sweep(&cfg)?;
            for (system, rows) in &outcome.tables {
                for r in rows {
                    println!("{system} {}={} mean {:.4} std {:.4} seeds {}", r.param, r.value, r.mean_erank, r.std_erank, r.n_seeds);
                }
            }
            for (system, value, message) in &outcome.failures {
                eprintln!("cell {system} {value} failed: {message}");
            }
            for path in write_sweep(&outcome, &cfg, &dir)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Oracle { common, random_draws } => {
            let (cfg, dir) = load(&common)?;
            let report = oracle_report(&cfg, random_draws)?;
            println!(
                "oracle {:.4} over {} placements  greedy {:.4}  random mean {:.4}",
                report.oracle_value, report.evaluated, report.greedy_value, report.random_mean
            );
            write_json(&report, &dir.join("oracle.json"))?;
            println!("wrote {}", dir.join("oracle.json").display());
        }
        Command::GradCheck { seed, probes, out } => {
            let checks = gradient_suite(seed, probes);
            let mut ok = true;
            for c in &checks {
                let status = if c.passed() { "ok" } else { "FAIL" };
                ok &= c.passed();
                println!(
                    "{:<18} {status:<4} max rel err {:.3e}  probes {} (redrawn {})  scalars {}",
                    c.layer, c.max_relative_error, c.probes, c.redraws, c.scalars
                );
            }
            println!("tolerance {TOLERANCE:e}");
            if let Some(path) = out {
                write_json(&checks, &path)?;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
