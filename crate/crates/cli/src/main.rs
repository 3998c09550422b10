//! `nlwave`: command-line driver for forward solves, DN measurements, Runge
//! sweeps and both inverse problems.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use output::{Manifest, Staging, Timings};

#[derive(Parser)]
#[command(
    name = "nlwave",
    version,
    about = "Fractional wave equations on an interval: simulation and inversion"
)]
struct Cli {
    /// TOML config; keys not given fall back to the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set operator.s=0.75`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenpairs of the interior operator and Gram checks.
    Eig,
    /// Forward solve from modal Cauchy data.
    Solve,
    /// DN pairing matrix between the W1 and W2 control bases.
    Dn,
    /// Runge approximation sweeps over alpha and basis size.
    Runge,
    /// Recover a potential from simulated DN data.
    InvertQ,
    /// Recover the expansion coefficients of a nonlinearity.
    InvertF,
    /// Deterministic self-check suite; exits nonzero on failure.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Solve => "solve",
            Command::Dn => "dn",
            Command::Runge => "runge",
            Command::InvertQ => "invert-q",
            Command::InvertF => "invert-f",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let text = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut cfg = ExperimentConfig::load(text.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let threads = match cli.threads {
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            n
        }
        None => rayon::current_num_threads(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.display().to_string();
    }
    let out = PathBuf::from(&cfg.out);
    let mut st = Staging::new(&out)?;
    let mut t = Timings::default();
    let (summary, ok) = match cli.command {
        Command::Eig => (commands::eig(&cfg, &mut st, &mut t)?, true),
        Command::Solve => (commands::solve(&cfg, &mut st, &mut t)?, true),
        Command::Dn => (commands::dn(&cfg, &mut st, &mut t)?, true),
        Command::Runge => (commands::runge(&cfg, &mut st, &mut t)?, true),
        Command::InvertQ => (commands::invert_q(&cfg, &mut st, &mut t)?, true),
        Command::InvertF => (commands::invert_f(&cfg, &mut st, &mut t)?, true),
        Command::Verify => verify::verify(&cfg, &mut st, &mut t)?,
    };
    let canonical = cfg.canonical()?;
    let manifest = Manifest {
        tool: "nlwave",
        version: env!("CARGO_PKG_VERSION"),
        core_version: nlwave_core::VERSION,
        subcommand: cli.command.name().to_string(),
        seed: cfg.seed,
        threads,
        overrides: cli.overrides.clone(),
        config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
        config: canonical,
        grid_signature: cfg.grid()?.signature(),
        summary,
        artifacts: Vec::new(),
        timings: t.entries,
    };
    let dir = st.finish(manifest)?;
    println!("results in {}", dir.display());
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
