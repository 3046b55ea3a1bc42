//! Batch runner: `friedrichs <command> --config run.json`.
//!
//! Exit codes are 0 on success, 1 for usage or config errors, 2 when a
//! validation fails and 3 on numerical failure. Every run leaves a
//! `manifest.json` next to its outputs; `--check` re-runs into a scratch
//! directory and compares the output hashes with the recorded manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::{CommandKind, Context};
use config::ExperimentConfig;
use error::CliError;
use manifest::{compare_outputs, config_hash, OutputWriter, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "friedrichs", version, about = "Parametrized Friedrichs' systems: DG solves, checks and N-width estimates")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structural checks, boundary admissibility and Gram positivity.
    Validate(RunArgs),
    /// Exponential-decay certificate of the configured system.
    Classify(RunArgs),
    /// Discrete solutions at the sampled parameters.
    Solve(RunArgs),
    /// Snapshot sweep summary.
    Sweep(RunArgs),
    /// POD and strong greedy decay with fitted rates.
    Nwidth(RunArgs),
    /// Sectional greedy over the configured dictionaries.
    Sectional(RunArgs),
    /// Plot-ready decay data and a gnuplot script.
    Report(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Re-run and compare against the manifest in the output directory.
    #[arg(long)]
    check: bool,
    /// Also write assembled matrices in Matrix Market format.
    #[arg(long)]
    debug_matrices: bool,
}

impl Command {
    fn parts(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Validate(a) => (CommandKind::Validate, a),
            Command::Classify(a) => (CommandKind::Classify, a),
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Nwidth(a) => (CommandKind::Nwidth, a),
            Command::Sectional(a) => (CommandKind::Sectional, a),
            Command::Report(a) => (CommandKind::Report, a),
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (kind, args) = cli.command.parts();
    let (cfg, value) = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let once = |dir: &Path| pool.install(|| run_once(kind, &cfg, &value, seed, args.debug_matrices, dir));

    if !args.check {
        let (result, m) = once(&out)?;
        return match result {
            Ok(()) => {
                println!("{}: {} outputs in {}", kind.name(), m.outputs.len(), out.display());
                Ok(0)
            }
            Err(e) => Err(e),
        };
    }

    let recorded = RunManifest::load(&out)?;
    let scratch = tempfile::tempdir().map_err(|e| CliError::io("scratch directory", e))?;
    let (result, fresh) = once(scratch.path())?;
    if let Err(e) = &result {
        if !matches!(e, CliError::Validation(_)) {
            return Err(result.unwrap_err());
        }
    }
    let mut diffs = compare_outputs(&recorded.outputs, &fresh.outputs);
    if recorded.config_sha256 != fresh.config_sha256 {
        diffs.push("config hash differs".into());
    }
    if recorded.command != fresh.command || recorded.seed != fresh.seed {
        diffs.push(format!(
            "recorded run was '{}' with seed {}",
            recorded.command, recorded.seed
        ));
    }
    if !diffs.is_empty() {
        for d in &diffs {
            eprintln!("check: {d}");
        }
        return Err(CliError::Validation(format!("{} output(s) do not reproduce", diffs.len())));
    }
    println!("check: {} outputs reproduce", fresh.outputs.len());
    Ok(result.err().map_or(0, |e| e.exit_code()))
}

/// One run into `dir`; the manifest is written even when the command fails.
fn run_once(
    kind: CommandKind,
    cfg: &ExperimentConfig,
    value: &Value,
    seed: u64,
    debug_matrices: bool,
    dir: &Path,
) -> Result<(Result<(), CliError>, RunManifest), CliError> {
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut ctx = Context {
        cfg,
        seed,
        debug_matrices,
        out: OutputWriter::new(dir)?,
    };
    let result = commands::dispatch(kind, &mut ctx);
    let manifest = ctx.out.finish(RunManifest {
        config_sha256: config_hash(value),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: kind.name().to_string(),
        seed,
        threads: rayon::current_num_threads(),
        started_unix,
        wall_clock_seconds: 0.0,
        stages: Vec::new(),
        outputs: Vec::new(),
        exit_code: result.as_ref().err().map_or(0, |e| e.exit_code()),
    })?;
    Ok((result, manifest))
}
