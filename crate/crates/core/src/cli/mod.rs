//! The `impscore` command-line tool.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | usage error (unknown flag, missing argument) |
//! | 3 | file could not be read or written |
//! | 4 | malformed input or schema violation |
//! | 5 | embedding backend failure |
//! | 6 | invalid configuration, dimension mismatch or invalid input |
//!
//! Failures print one line to stderr: `error: <kind>: <message>`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{BackendSpec, FileConfig, EMBED_URL_ENV};

use crate::error::Error;
use crate::model::{Metric, Transform};

#[derive(Debug, Parser)]
#[command(
    name = "impscore",
    version,
    about = "Implicitness scoring, training and evaluation"
)]
pub struct Cli {
    /// Flat TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice (split, init, shuffling, sampling).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Embedding backend: toy, toy:<seed>, file:<path>, service:<url>, or
    /// service (address from IMPSCORE_EMBED_URL).
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend: Option<String>,

    /// Suppress progress lines on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build training instances from positive pairs by drawing negatives
    /// within each source.
    MakeInstances(MakeInstancesArgs),
    /// Train a projection head and write a checkpoint.
    Train(TrainArgs),
    /// Score texts (one per line) and print `text<TAB>score`.
    Score(ScoreArgs),
    /// Pragmatic distance for tab-separated text pairs.
    Pairdist(PairdistArgs),
    /// Implicitness and pragmatics accuracy on an instances file.
    Eval(EvalArgs),
    /// Run the four-sentence ranking task.
    Rank(TaskArgs),
    /// Run the three-option choice task.
    Choice(TaskArgs),
    /// Corpus summary, implicitness bins and pragmatic diversity.
    Analyze(AnalyzeArgs),
    /// Character-length statistics of an instances file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct MakeInstancesArgs {
    /// Positive pairs, JSONL with implicit, explicit, source.
    pub pairs: PathBuf,
    /// Output instances file.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also write skipped pairs as JSONL.
    #[arg(long, value_name = "PATH")]
    pub skipped: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training instances, JSONL.
    pub instances: PathBuf,
    /// Output checkpoint.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Per-epoch history [default: history.json next to the checkpoint].
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,
    /// Write the train/val/test partitions as JSONL into this directory.
    #[arg(long, value_name = "DIR")]
    pub split_dir: Option<PathBuf>,
    /// Embedding dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    pub l: Option<usize>,
    /// Implicitness metric: cosine or euclidean.
    #[arg(long)]
    pub imp_metric: Option<Metric>,
    /// Pragmatic distance metric: cosine or euclidean.
    #[arg(long)]
    pub prag_metric: Option<Metric>,
    /// Space transformation: p_to_s, s_to_p or third_space.
    #[arg(long)]
    pub transform: Option<Transform>,
    /// Implicitness margin.
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Pragmatic margin.
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Weight of the pragmatic loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Instances per mini-batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Passes over the training partition.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train,val,test ratios, e.g. 0.8,0.1,0.1.
    #[arg(long, value_parser = parse_split, value_name = "R,R,R")]
    pub split: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Checkpoint to score with.
    pub checkpoint: PathBuf,
    /// Texts, one per line; blank lines are skipped [default: stdin].
    pub input: Option<PathBuf>,
    /// Write the TSV here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also dump projected features per text as JSONL.
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairdistArgs {
    /// Checkpoint to score with.
    pub checkpoint: PathBuf,
    /// Lines of `text_a<TAB>text_b` [default: stdin].
    pub input: Option<PathBuf>,
    /// Write the TSV here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    /// Instances, JSONL.
    pub instances: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    pub checkpoint: PathBuf,
    /// Questions, JSONL.
    pub questions: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write one CSV row per question.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub checkpoint: PathBuf,
    /// Texts, one per line; blank lines are skipped.
    pub texts: PathBuf,
    /// Detection verdicts, JSONL with text, flagged, model.
    #[arg(long, value_name = "PATH")]
    pub verdicts: Option<PathBuf>,
    /// Directory for report.json and report.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Drop repeated texts before summarizing and binning.
    #[arg(long)]
    pub dedup: bool,
    /// Sentence pairs sampled for pragmatic diversity [default: 2000].
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Instances, JSONL.
    pub instances: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_split(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three ratios, got {}", p.len()))
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Stdio(_) => 3,
        Error::Format { .. } | Error::Schema { .. } | Error::Json(_) => 4,
        Error::Backend(_) | Error::MissingEmbedding(_) => 5,
        Error::Config(_) | Error::Dimension { .. } | Error::InvalidInput(_) => 6,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {msg}", e.kind());
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
