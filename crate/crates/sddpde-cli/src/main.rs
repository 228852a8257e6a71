//! Batch front door: load an experiment config (or a named preset), run it,
//! and write the artifact files.
//!
//! Exit codes: 0 when the run's internal checks pass, 2 when a check fails
//! or the solver reports a diagnostic, 1 for configuration errors.

use anyhow::Context;
use clap::{Parser, Subcommand};
use sddpde::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use sddpde::presets;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sddpde", version, about = "Spectral delay-PDE experiment runner")]
struct Cli {
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps (0 = auto).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's run.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset experiment.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::ListPresets => {
            print!("{}", presets::list());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            execute(&text, out, cli.seed, cli.threads)
        }
        Command::Preset { name, out } => {
            let Some((_, _, text)) = presets::get(&name) else {
                anyhow::bail!(
                    "unknown preset {name:?}; did you mean {:?}? (see `sddpde list-presets`)",
                    presets::nearest(&name)
                );
            };
            execute(text, out, cli.seed, cli.threads)
        }
    }
}

fn execute(
    text: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::parse_with_env(text, std::env::vars())?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(threads) = threads {
        cfg.threads = threads;
    }
    let outcome = match run_experiment(&cfg, out.as_deref()) {
        Ok(o) => o,
        Err(e @ ExperimentError::Io { .. }) => return Err(e.into()),
        Err(e) => return Err(e.into()),
    };

    // Certification runs get one line per criterion; everything else a
    // compact summary.
    if let Some(criteria) = outcome.report.get("criteria").and_then(|c| c.as_array()) {
        for c in criteria {
            println!(
                "criterion {} ({}): {} — {} [{:.1}s]",
                c["id"],
                c["name"].as_str().unwrap_or("?"),
                if c["pass"].as_bool().unwrap_or(false) {
                    "PASS"
                } else {
                    "FAIL"
                },
                c["detail"].as_str().unwrap_or(""),
                c["runtime_s"].as_f64().unwrap_or(0.0),
            );
        }
    } else {
        println!(
            "{}",
            serde_json::to_string(&outcome.report).expect("report serializes")
        );
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(ExitCode::from(outcome.exit_code as u8))
}
