use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtwin_expctl::config::{load_config, ExperimentConfig, RunMode};
use vtwin_expctl::runs::run;

/// Vehicle-twin pre-migration experiments: diffusion-policy training,
/// evaluation, baselines and UAV routing studies.
///
/// Any config key can be overridden from the environment with the VTWIN_
/// prefix and `__` between nested keys, e.g. VTWIN_TRAINER__EPISODES=50.
#[derive(Debug, Parser)]
#[command(name = "vtwin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML). Without it, built-in defaults apply.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed to run; repeat for several. Replaces the config's seed list.
    #[arg(long = "seed", global = true, value_name = "N")]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Trained agent for eval and sweep.
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Use the verbatim routing heuristic sign convention.
    #[arg(long, global = true)]
    strict_paper: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Train the diffusion agent for each seed.
    Train,
    /// Evaluate a policy over the RSU compute sweep.
    Eval,
    /// Run a fixed comparison policy.
    Baseline,
    /// Compare UAV routing algorithms.
    Route,
    /// Latency sweep for every fixed policy (and the agent, given a checkpoint).
    Sweep,
}

fn configure(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => vtwin_expctl::config::parse_config("", std::path::Path::new("."), std::env::vars())?,
    };
    cfg.mode = match cli.command {
        Command::Train => RunMode::Train,
        Command::Eval => RunMode::Eval,
        Command::Baseline => RunMode::Baseline,
        Command::Route => RunMode::Route,
        Command::Sweep => RunMode::Sweep,
    };
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.strict_paper |= cli.strict_paper;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure(&cli).and_then(|cfg| Ok((run(&cfg, cli.checkpoint.as_deref())?, cfg.out_dir)));
    match result {
        Ok((summary, out)) => {
            println!(
                "{} finished in {:.1} s; results in {}",
                summary.run_id,
                summary.wall_clock_seconds,
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
