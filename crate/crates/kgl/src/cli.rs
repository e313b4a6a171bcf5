//! Argument parsing and dispatch for the `kgl` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::{KglError, Result};

#[derive(Debug, Parser)]
#[command(name = "kgl", version, about = "Knowledge-guided lexicon induction and regional scoring")]
pub struct Cli {
    /// TOML run configuration; relative paths inside resolve against its directory.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set lexicon.theta=0.1` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (overrides paths.output, relative to the working directory).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads for ingestion and bootstrap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand seeds, count the corpus and purify into lexicon CSVs.
    Build {
        /// Only this construct.
        #[arg(long)]
        construct: Option<String>,
    },
    /// Score regions with the built lexica.
    Score {
        #[arg(long)]
        construct: Option<String>,
    },
    /// Correlate state scores with indicators, bootstrap method differences.
    Validate,
    /// Threshold sweeps over expansion and purification.
    Ablate,
    /// Gaussian-process fill-in of unscored counties.
    Interpolate,
    /// Generate a planted-signal dataset with a runnable config.
    Synth,
}

impl Cli {
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(out) = &self.output {
            let cwd = std::env::current_dir().map_err(|e| KglError::io(out, e))?;
            cfg.paths.output = cwd.join(out);
        }
        Ok(cfg)
    }
}

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| KglError::config(format!("--threads: {e}")))?;
    }
    let cfg = cli.effective_config()?;
    match &cli.command {
        Command::Build { construct } => {
            let out = commands::build::run(&cfg, construct.as_deref())?;
            for r in &out.reports {
                log::info!("{}: {} words after purification", r.construct, r.n_after_purification);
            }
        }
        Command::Score { construct } => {
            commands::score::run(&cfg, construct.as_deref())?;
        }
        Command::Validate => {
            let out = commands::validate::run(&cfg)?;
            for (m, rows) in &out.methods {
                for r in rows {
                    log::info!("{m} {}: average validity {:?}", r.construct, r.average_validity);
                }
            }
        }
        Command::Ablate => {
            commands::ablate::run(&cfg)?;
        }
        Command::Interpolate => {
            let out = commands::interpolate::run(&cfg)?;
            if !out.interpolation.gaps.is_empty() {
                eprintln!("warning: {} counties could not be used or filled (see gaps.csv)", out.interpolation.gaps.len());
            }
        }
        Command::Synth => {
            commands::synth::run(&cfg)?;
        }
    }
    log::info!("outputs in {}", cfg.output_dir().display());
    Ok(())
}
