//! `endgen` — command-line front end for the story-ending pipeline.
//!
//! Six subcommands cover the full workflow: `preprocess` builds the
//! vocabulary, triple store, and embedding table; `train` fits a model and
//! writes a checkpoint; `generate` decodes endings; `eval` reports
//! perplexity and BLEU; `attn` exports attention maps; `stats` prints
//! corpus and store summaries.
//!
//! Configuration is a flat key=value space merged from four layers, lowest
//! precedence first: built-in defaults, the `--config` file, `ENDGEN_<KEY>`
//! environment variables, command-line flags. The merged configuration is
//! echoed before any work starts, and every command ends with one
//! machine-readable `RESULT <command> key=value ...` line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use endgen_core::attn::AttnError;
use endgen_core::corpus::CorpusError;
use endgen_core::decode::DecodeError;
use endgen_core::eval::EvalError;
use endgen_core::knowledge::KnowledgeError;
use endgen_core::model::{CheckpointError, ModelError};
use endgen_core::trainer::TrainError;

mod commands;
mod config;

use config::RunConfig;

// ── Errors and exit codes ───────────────────────────────────────────────────

/// Command failures, sorted by exit code: bad invocation (1), bad or missing
/// data (2), non-finite arithmetic (3).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Numeric(m) => write!(f, "numeric: {m}"),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<KnowledgeError> for CliError {
    fn from(e: KnowledgeError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            TrainError::BadConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> CliError {
        match e {
            DecodeError::ZeroBeam | DecodeError::ZeroMaxLen => CliError::Usage(e.to_string()),
            DecodeError::Model(m) => CliError::Data(m.to_string()),
        }
    }
}

impl From<AttnError> for CliError {
    fn from(e: AttnError) -> CliError {
        CliError::Data(e.to_string())
    }
}

// ── Command line ────────────────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "endgen",
    version,
    about = "Train, run, and inspect a story-ending generator",
    after_help = "Configuration keys can also come from a --config file \
                  (key=value lines) or ENDGEN_<KEY> environment variables; \
                  flags take precedence over both."
)]
struct Cli {
    /// Path to a key=value configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master random seed (overrides key `seed`)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Model variant (overrides key `variant`)
    #[arg(long, global = true, value_parser = ["ie", "ie-ga", "ie-ca"])]
    variant: Option<String>,

    /// Beam width; 1 decodes greedily (overrides key `beam`)
    #[arg(long, global = true)]
    beam: Option<usize>,

    /// Generation length cap (overrides key `max_len`)
    #[arg(long, global = true)]
    max_len: Option<usize>,

    /// Threads for evaluation passes (overrides key `workers`)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary, triple store, and embedding table
    Preprocess,
    /// Train a model and write a checkpoint
    Train,
    /// Decode an ending for every story
    Generate,
    /// Report perplexity and BLEU against reference endings
    Eval,
    /// Export per-story attention maps
    Attn,
    /// Print corpus and triple-store statistics
    Stats,
}

fn merged_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::defaults();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env()?;
    if let Some(v) = cli.seed {
        cfg.apply_flag("seed", v.to_string());
    }
    if let Some(v) = &cli.variant {
        cfg.apply_flag("variant", v.clone());
    }
    if let Some(v) = cli.beam {
        cfg.apply_flag("beam", v.to_string());
    }
    if let Some(v) = cli.max_len {
        cfg.apply_flag("max_len", v.to_string());
    }
    if let Some(v) = cli.workers {
        cfg.apply_flag("workers", v.to_string());
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = merged_config(cli)?;
    cfg.echo();
    match cli.command {
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Generate => commands::generate(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Attn => commands::attn(&cfg),
        Command::Stats => commands::stats(&cfg),
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run());
}
