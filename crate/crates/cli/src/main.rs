//! `hypodecay`: stability checks, data synthesis, linear and nonlinear runs, rate verdicts and
//! canned reproductions of the acceptance experiments.

mod output;
mod pipelines;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hypodecay::config::{ExperimentConfig, Kind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "hypodecay", version, about = "Decay-rate experiments for partially dissipative systems")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports, CSV series and plot scripts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for mode factorization.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stability report of a builtin system or system file.
    Check { system: Option<String> },
    /// Synthesize data with a prescribed decay character and estimate it back.
    Synth,
    /// Exact linear evolution; records Besov norms of both components.
    RunLinear,
    /// Nonlinear damped Euler run.
    RunEuler,
    /// Linear run checked against the two-sided decay rates.
    Decay,
    /// Linear run compared with its Chapman–Enskog profile.
    Profile,
    /// Nonlinear minus linear evolution from identical data.
    DeltaV,
    /// Canned acceptance experiment (`list` prints the names).
    Reproduce { name: String },
}

impl Command {
    fn kind(&self) -> Kind {
        match self {
            Command::Check { .. } => Kind::Check,
            Command::Synth => Kind::Synth,
            Command::RunLinear => Kind::RunLinear,
            Command::RunEuler => Kind::RunEuler,
            Command::Decay => Kind::Decay,
            Command::Profile => Kind::Profile,
            Command::DeltaV => Kind::DeltaV,
            Command::Reproduce { .. } => Kind::Reproduce,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let kind = cli.command.kind();
    if let Some(k) = cfg.kind {
        if k != kind {
            bail!("config kind {} does not match subcommand {}", k.as_str(), kind.as_str());
        }
    }
    cfg.kind = Some(kind);
    match &cli.command {
        Command::Check { system: Some(s) } => cfg.system = s.clone(),
        Command::Reproduce { name } => cfg.name = Some(name.clone()),
        _ => {}
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if let Command::Reproduce { name } = &cli.command {
        if name == "list" {
            for (ac, name) in hypodecay::experiments::ACCEPTANCE {
                println!("{ac}\t{name}");
            }
            return Ok(true);
        }
    }
    let cfg = load_config(cli)?;
    let outcome = pipelines::run(&cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let stem = match &cli.command {
        Command::Reproduce { name } => name.clone(),
        c => c.kind().as_str().to_string(),
    };
    let written = output::write_all(&dir, &stem, &outcome)?;
    println!("{}", outcome.summary());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(outcome.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
