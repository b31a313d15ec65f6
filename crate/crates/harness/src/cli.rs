//! The `cattr` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::run::CONFIG_FILE;
use crate::stages::{self, Context};

/// Default output directory when neither `--out` nor the config names one.
pub const DEFAULT_OUT: &str = "cattr-run";

#[derive(Debug, Parser)]
#[command(name = "cattr", version, about = "Concept probing and ensemble attribution pipeline")]
pub struct Cli {
    /// Experiment configuration (JSON). Defaults to `<out>/config.json` when
    /// it exists, else the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the base dataset and concept splits.
    GenData,
    /// Train the M base models.
    TrainEnsemble,
    /// Dense probes at every tap for every concept.
    ProbeSweep,
    /// Sparse probes for every configured k.
    SparsitySweep,
    /// Ensemble attribution of the configured concept.
    Attribute,
    /// Retrain without the top-T attributed images and re-probe.
    Leaveout,
    /// Consolidate outputs into an indexed bundle.
    Report,
    /// Compare attribution with leave-one-out retraining on a small fixture.
    OracleCheck,
    /// Every stage in order, then `report`.
    All,
}

/// Resolves the configuration and run directory from the global flags.
pub fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let from_out = cli.out.as_ref().map(|o| o.join(CONFIG_FILE)).filter(|p| p.exists());
    let mut cfg = match (&cli.config, from_out) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(path)) => ExperimentConfig::load(&path)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((cfg, out))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let (cfg, out) = resolve(cli)?;
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Context::new(cfg, out, threads)?;
    match cli.command {
        Command::GenData => stages::gen_data(&ctx),
        Command::TrainEnsemble => stages::train_ensemble(&ctx),
        Command::ProbeSweep => stages::probe_sweep(&ctx),
        Command::SparsitySweep => stages::sparsity_sweep(&ctx),
        Command::Attribute => stages::attribute(&ctx),
        Command::Leaveout => stages::leaveout(&ctx),
        Command::Report => stages::emit_reports(&ctx).map(|_| ()),
        Command::OracleCheck => stages::oracle_check(&ctx).map(|_| ()),
        Command::All => {
            stages::gen_data(&ctx)?;
            stages::train_ensemble(&ctx)?;
            stages::probe_sweep(&ctx)?;
            stages::sparsity_sweep(&ctx)?;
            stages::attribute(&ctx)?;
            stages::leaveout(&ctx)?;
            stages::oracle_check(&ctx)?;
            stages::emit_reports(&ctx).map(|_| ())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for invalid usage or configuration, 2 for failures
/// while running.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
