//! Command-line front end: manifest loading, the four subcommands, and exit
//! code policy. Kept as a library so integration tests can drive commands
//! without spawning processes.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 when the
//! suite ran but some tasks failed.

pub mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "streameval",
    about = "Streaming evaluation harness for vision-language assistants",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a suite of tasks against a backend and write response logs.
    Run(RunArgs),
    /// Score response logs against annotations and write a report.
    Score(ScoreArgs),
    /// Write a deterministic synthetic suite to disk.
    Fixtures(FixturesArgs),
    /// Check annotation files and response logs for schema violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Suite manifest (annotations, sources, run config).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the manifest's out_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the manifest's protocol (sync | async).
    #[arg(long)]
    pub protocol: Option<String>,
    /// Override the memory policy (sw | u | sw+u).
    #[arg(long)]
    pub policy: Option<String>,
    /// Override the context size (frames per inference).
    #[arg(long)]
    pub context_size: Option<usize>,
    /// Override the camera buffer capacity.
    #[arg(long)]
    pub camera_buffer_size: Option<usize>,
    /// Override the camera frame rate.
    #[arg(long)]
    pub camera_fps: Option<f64>,
    /// Override the clock mode (wall | virtual).
    #[arg(long)]
    pub clock: Option<String>,
    /// Override the backend: echo[:latency] or mock:<script path>.
    #[arg(long)]
    pub backend: Option<String>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Also write per-task camera buffer traces (<task_id>.trace.jsonl).
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Directory holding <task_id>.responses.json files.
    #[arg(long)]
    pub logs: PathBuf,
    /// Annotation file the logs are scored against.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Judge: oracle | remote:<config path>.
    #[arg(long, default_value = "oracle")]
    pub judge: String,
    /// Aggregate weighting: uniform | inverse_category | inverse_task | inverse_both.
    #[arg(long, default_value = "uniform")]
    pub weighting: String,
    /// Consistency denominator: timesteps | pairs.
    #[arg(long, default_value = "timesteps")]
    pub denominator: String,
    /// Where to write report.json and report.md; defaults to the logs dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the table to stdout as well as writing it.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    /// Which suite to write: smoke | tradeoff | buffer-drop.
    pub kind: String,
    /// Output directory for the fixture files.
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Annotation files or response logs, in any mix.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

/// Runs one parsed command and returns its exit code. Errors are printed to
/// stderr here so main stays a thin shim.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => commands::run::cmd_run(&args),
        Command::Score(args) => commands::score::cmd_score(&args),
        Command::Fixtures(args) => commands::fixtures::cmd_fixtures(&args),
        Command::Validate(args) => commands::validate::cmd_validate(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_CONFIG
        }
    }
}
