//! `frag` — pipeline driver for synthetic race-condition experiments.
//!
//! Subcommands mirror the pipeline stages: `generate` a corpus, `detect`
//! with the graph detector or the time-window baseline, `evaluate` against
//! ground truth, `verify` injected instances with the definitional oracle,
//! and `reproduce` to chain all three conditions end to end.
//!
//! Exit codes: 0 success, 1 usage error, 2 verification/integrity failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frag_core::Error;

#[derive(Parser)]
#[command(name = "frag", version, about = "Race-condition detection toolkit for FHIR-style transaction logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded corpus of transaction logs with injected races.
    Generate(GenerateArgs),
    /// Run a detector over a log file or corpus directory.
    Detect(DetectArgs),
    /// Score detections against ground truth and emit report JSON/CSV.
    Evaluate(EvaluateArgs),
    /// Check every injected instance against its race definition.
    Verify(VerifyArgs),
    /// Generate, detect and evaluate all three conditions in one run.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    C1,
    C2,
    C3,
}

impl ConditionArg {
    fn to_condition(self) -> frag_core::model::Condition {
        match self {
            ConditionArg::C1 => frag_core::model::Condition::C1,
            ConditionArg::C2 => frag_core::model::Condition::C2,
            ConditionArg::C3 => frag_core::model::Condition::C3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Frag,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalDetectorArg {
    Auto,
    Frag,
    Baseline,
}

#[derive(Args)]
struct GenerateArgs {
    /// Experimental condition.
    #[arg(long, value_enum)]
    condition: ConditionArg,
    /// Output directory for logs and the corpus manifest.
    #[arg(long)]
    out: PathBuf,
    /// Number of logs.
    #[arg(long, default_value_t = 500)]
    n_logs: usize,
    /// Base seed; per-log seeds are derived from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Minimum background events per log.
    #[arg(long, default_value_t = 200)]
    background_min: u64,
    /// Maximum background events per log.
    #[arg(long, default_value_t = 800)]
    background_max: u64,
    /// Minimum injected race instances per log (C2/C3).
    #[arg(long, default_value_t = 8)]
    race_min: u64,
    /// Maximum injected race instances per log (C2/C3).
    #[arg(long, default_value_t = 40)]
    race_max: u64,
    /// Proportion of SWC instances.
    #[arg(long, default_value_t = 0.40)]
    mix_swc: f64,
    /// Proportion of TAV instances.
    #[arg(long, default_value_t = 0.30)]
    mix_tav: f64,
    /// Proportion of CUR instances.
    #[arg(long, default_value_t = 0.30)]
    mix_cur: f64,
    /// SWC injection window, seconds.
    #[arg(long, default_value_t = 0.150)]
    swc_delta: f64,
    /// READ:WRITE ratio of background traffic.
    #[arg(long, default_value_t = 3.0)]
    read_write_ratio: f64,
    /// Weight of the two hot resource types relative to the others.
    #[arg(long, default_value_t = 2.0)]
    hot_resource_weight: f64,
    /// Fraction of writes flagged ETag-protected (C3 only).
    #[arg(long, default_value_t = 0.70)]
    etag_fraction: f64,
    /// Number of client processes.
    #[arg(long, default_value_t = 6)]
    n_processes: usize,
    /// Resource ids available per resource type.
    #[arg(long, default_value_t = 40)]
    resource_pool_per_type: usize,
    /// Nominal log duration, seconds.
    #[arg(long, default_value_t = 60.0)]
    log_duration: f64,
    /// Minimum inter-event spacing under C1, seconds.
    #[arg(long, default_value_t = 0.250)]
    c1_min_spacing: f64,
    /// Mean hot-resource contention clusters per C2/C3 log.
    #[arg(long, default_value_t = 1.0)]
    hot_cluster_rate: f64,
}

#[derive(Args)]
struct DetectArgs {
    /// Corpus directory or single log file.
    #[arg(long, value_name = "DIR|FILE")]
    r#in: PathBuf,
    /// Which detector to run.
    #[arg(long, value_enum)]
    detector: DetectorArg,
    /// Output directory (for a corpus) or file (for a single log).
    #[arg(long, value_name = "DIR|FILE")]
    out: PathBuf,
    /// SWC concurrency window, seconds.
    #[arg(long, default_value_t = 0.150)]
    delta: f64,
    /// TAV lookahead from read to dependent write, seconds.
    #[arg(long, default_value_t = 0.250)]
    delta_tav: f64,
    /// CUR lookback from a write to the stale read, seconds.
    #[arg(long, default_value_t = 0.150)]
    cur_lookback: f64,
    /// CUR lookahead from a write to the downstream read, seconds.
    #[arg(long, default_value_t = 0.100)]
    cur_lookahead: f64,
    /// Honor ETag protection flags (C3 runs).
    #[arg(long, default_value_t = false)]
    respect_etag: bool,
    /// Baseline scan window, seconds.
    #[arg(long, default_value_t = 0.200)]
    window: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of transaction logs.
    #[arg(long)]
    logs: PathBuf,
    /// Directory of matching detection files.
    #[arg(long)]
    detections: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Report CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Matching tolerance, seconds.
    #[arg(long, default_value_t = 0.050)]
    tolerance: f64,
    /// Detector label; `auto` infers it from the detection classes.
    #[arg(long, value_enum, default_value_t = EvalDetectorArg::Auto)]
    detector: EvalDetectorArg,
}

#[derive(Args)]
struct VerifyArgs {
    /// Corpus directory to verify.
    #[arg(long, value_name = "DIR")]
    r#in: PathBuf,
    /// Concurrency window for the SWC definitional check, seconds.
    #[arg(long, default_value_t = 0.150)]
    delta: f64,
    /// Skip the detector-within-oracle containment cross-check.
    #[arg(long, default_value_t = false)]
    no_containment: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Output directory for corpora, detections and reports.
    #[arg(long)]
    out: PathBuf,
    /// Logs per condition.
    #[arg(long, default_value_t = 500)]
    n_logs: usize,
    /// Base seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Schema { .. }
        | Error::Integrity(_)
        | Error::EnumerationLimit { .. } => 2,
        Error::Usage(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Detect(args) => commands::detect(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Verify(args) => commands::verify(args),
        Command::Reproduce(args) => commands::reproduce(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
