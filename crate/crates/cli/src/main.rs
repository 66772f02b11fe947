//! `shardsim` batch driver.
//!
//! Exit codes: 0 success, 1 other error, 2 configuration error, 3 monitor
//! breach, 4 oracle mismatch.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{info, warn};

use shardsim::analysis::adversary::AdversaryStrategy;
use shardsim::analysis::bins::{mc_static_failure_rate, StaticMcConfig};
use shardsim::analysis::bounds::{analytic_failure_bound, bound_table};
use shardsim::framework::{compare_with_oracle, NegativeMode};
use shardsim::{golden, Simulation};

use config::{Effective, FileConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "shardsim", version, about = "Sharded ledger simulator and analysis suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the framework round count.
    #[arg(long, global = true)]
    rounds: Option<u64>,
    #[arg(long, global = true)]
    negative_mode: Option<NegativeMode>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run the sharded framework and write the event log and summary.
    Simulate,
    /// Run the sharded framework next to the unsharded oracle.
    OracleCompare,
    /// Static bins Monte Carlo over the configured grid.
    BinsMc,
    /// Analytic failure bounds over the configured grid.
    BoundTable,
    /// Write the reference membership vectors.
    GoldenVectors,
}

enum Failure {
    Config(anyhow::Error),
    Breach(String),
    Mismatch(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Breach(msg)) => {
            eprintln!("monitor breach: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("oracle mismatch: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Config)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        rounds: cli.rounds,
        negative_mode: cli.negative_mode,
    };
    let eff = file.resolve(&overrides);
    validate(cli.command, &eff).map_err(Failure::Config)?;

    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    std::fs::write(cli.out.join("effective_config.toml"), eff.to_toml()?)?;

    match cli.command {
        Command::Simulate => simulate(&eff, &cli.out),
        Command::OracleCompare => oracle_compare(&eff, &cli.out),
        Command::BinsMc => bins_mc(&eff, &cli.out),
        Command::BoundTable => bounds(&eff, &cli.out),
        Command::GoldenVectors => golden_vectors(&cli.out),
    }
}

fn validate(command: Command, eff: &Effective) -> anyhow::Result<()> {
    match command {
        Command::Simulate | Command::OracleCompare => {
            eff.framework.validate()?;
            if matches!(command, Command::OracleCompare) && eff.framework.adversary != AdversaryStrategy::None {
                anyhow::bail!("oracle comparison needs an all-honest configuration (adversary = \"none\")");
            }
        }
        Command::BinsMc => {
            let b = &eff.bins;
            anyhow::ensure!(!b.n.is_empty() && !b.m.is_empty(), "bins grid is empty");
            anyhow::ensure!(b.n.iter().all(|&n| n > 0), "bins n must be positive");
            anyhow::ensure!(b.m.iter().all(|&m| m > 0), "bins m must be positive");
            anyhow::ensure!(b.trials > 0, "bins trials must be positive");
            anyhow::ensure!((0.0..1.0).contains(&b.red_fraction), "red_fraction outside [0, 1)");
        }
        Command::BoundTable => {
            let b = &eff.bounds;
            let positive = b.shard_counts.iter().chain(&b.nodes_per_shard).chain(b.rows.iter().flatten());
            anyhow::ensure!(positive.into_iter().all(|&x| x > 0), "bound grid entries must be positive");
        }
        Command::GoldenVectors => {}
    }
    Ok(())
}

fn simulate(eff: &Effective, out: &Path) -> Result<(), Failure> {
    let cfg = eff.framework.clone();
    info!("simulating n={} m={} for {} rounds", cfg.n, cfg.m, cfg.rounds);
    let mut sim = Simulation::new(cfg).map_err(|e| Failure::Config(e.into()))?;
    let mut events = csv::Writer::from_path(out.join("events.csv"))?;
    let mut write_err = None;
    let summary = sim.run_with(|report| {
        for e in &report.events {
            if let Err(err) = events.serialize(output::EventRow::from(e)) {
                write_err.get_or_insert(err);
            }
        }
    });
    if let Some(err) = write_err {
        return Err(err.into());
    }
    events.flush()?;

    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.serialize(output::SummaryRow::from(&summary))?;
    w.flush()?;
    info!(
        "{} rounds, {} txs approved, local fraction {:.4}",
        summary.rounds_completed, summary.approved_txs, summary.local_state_fraction
    );
    match summary.breaches.first() {
        Some(first) => Err(Failure::Breach(format!("{first} ({} breaches)", summary.breaches.len()))),
        None => Ok(()),
    }
}

fn oracle_compare(eff: &Effective, out: &Path) -> Result<(), Failure> {
    let c = compare_with_oracle(&eff.framework).map_err(|e| Failure::Config(e.into()))?;
    let mut w = csv::Writer::from_path(out.join("comparison.csv"))?;
    w.serialize(output::ComparisonRow::from(&c))?;
    w.flush()?;
    match &c.first_divergence {
        None => {
            info!("{} rounds equal, {} txs", c.rounds_compared, c.approved_txs);
            Ok(())
        }
        Some(d) => Err(Failure::Mismatch(format!(
            "round {}: {} transactions only in the sharded block, {} only in the oracle block",
            d.round, d.sharded_only, d.oracle_only
        ))),
    }
}

fn bins_mc(eff: &Effective, out: &Path) -> Result<(), Failure> {
    let b = &eff.bins;
    let mut w = csv::Writer::from_path(out.join("bins_mc.csv"))?;
    for &n in &b.n {
        for &m in &b.m {
            if n < m as u64 {
                warn!("skipping n={n} m={m}: fewer balls than bins");
                continue;
            }
            let e = mc_static_failure_rate(&StaticMcConfig {
                n,
                m,
                red_fraction: b.red_fraction,
                trials: b.trials,
                seed: b.seed,
            });
            info!("n={n} m={m}: {} failures of {}", e.failures, e.trials);
            w.serialize(output::BinsRow::new(&e, b.red_fraction))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bounds(eff: &Effective, out: &Path) -> Result<(), Failure> {
    let b = &eff.bounds;
    let mut rows = bound_table::<f64>(&b.shard_counts, &b.nodes_per_shard);
    rows.extend(b.rows.iter().map(|&[n, m]| analytic_failure_bound::<f64>(n, m)));
    let mut seen = std::collections::HashSet::new();
    let mut w = csv::Writer::from_path(out.join("bound_table.csv"))?;
    for r in rows.iter().filter(|r| seen.insert((r.n, r.m))) {
        w.serialize(output::BoundRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

fn golden_vectors(out: &Path) -> Result<(), Failure> {
    let g = golden::standard().context("generating vectors")?;
    std::fs::write(out.join("golden_vectors.json"), g.to_json())?;
    Ok(())
}
