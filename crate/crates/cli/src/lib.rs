//! Command-line front end for the roadside pipeline.
//!
//! Every subcommand reads and writes plain files, so stages can be rerun
//! independently. A `--config` TOML file may supply any flag; flags given on
//! the command line win.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use roadside::Error;

pub mod commands;
mod config;

pub use commands::{cmd_causal, cmd_classify_aggregate, cmd_keywords, cmd_report, cmd_simulate, cmd_train_eval};

#[derive(Debug, Parser)]
#[command(name = "roadside", version, about, args_override_self = true)]
pub struct Cli {
    /// TOML file of flag values; top-level keys apply to every subcommand that
    /// accepts them, `[subcommand]` tables to that subcommand only.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select entropy keywords for every labeled topic.
    Keywords(KeywordsArgs),
    /// Cross-validate and train one classifier per topic.
    Train(TrainArgs),
    /// Route documents through the hierarchical classifier and count topics per station.
    Classify(ClassifyArgs),
    /// Estimate causal connection strengths from an observation matrix.
    Causal(CausalArgs),
    /// Generate a synthetic structural-equation dataset or labeled corpus.
    Simulate(SimulateArgs),
    /// Print metrics and causal effects as tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    /// Token regex for the built-in segmenter.
    #[arg(long)]
    pub token_pattern: Option<String>,
    /// External segmenter command (whitespace-separated program and arguments).
    #[arg(long, conflicts_with = "token_pattern")]
    pub segmenter: Option<String>,
    /// File of words to drop, one per line.
    #[arg(long, value_name = "FILE")]
    pub stop_words: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Binary,
    CrossCategory,
}

#[derive(Debug, Clone, Args)]
pub struct KeywordsArgs {
    /// Documents (JSONL, or CSV by extension).
    #[arg(long)]
    pub docs: PathBuf,
    /// `doc_id,topic_id` label file.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_neg: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::CrossCategory)]
    pub mode: ModeArg,
    /// Restrict to these topics (default: every topic with a label).
    #[arg(long, value_delimiter = ',')]
    pub topics: Vec<String>,
    /// Also write negative keywords.
    #[arg(long)]
    pub negative: bool,
    #[command(flatten)]
    pub segment: SegmentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory holding `keywords_<topic>.csv` files.
    #[arg(long)]
    pub keywords: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated `C=..,tol=..,k=..,max_iter=..`.
    #[arg(long, default_value = "C=1,tol=1e-3,k=5")]
    pub hyper: String,
    /// Seed for the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub topics: Vec<String>,
    #[command(flatten)]
    pub segment: SegmentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub docs: PathBuf,
    /// Output directory of `train`.
    #[arg(long)]
    pub models: PathBuf,
    /// `station_id,sales` file.
    #[arg(long)]
    pub sales: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Official account names, one per line.
    #[arg(long, value_name = "FILE")]
    pub official_accounts: Option<PathBuf>,
    /// Literal check-in phrase (repeatable).
    #[arg(long = "checkin-pattern", default_values_t = roadside::pipeline::default_checkin_patterns())]
    pub checkin_patterns: Vec<String>,
    /// Topics counted as `x1, x2, ...`.
    #[arg(long, value_delimiter = ',', default_value = "T1,T2,T3,T4,T5,T6,T7")]
    pub count_topics: Vec<String>,
    #[command(flatten)]
    pub segment: SegmentArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NonlinearityArg {
    Tanh,
    Cube,
}

#[derive(Debug, Clone, Args)]
pub struct CausalArgs {
    /// Observation matrix CSV.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Seed for the ICA initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = NonlinearityArg::Tanh)]
    pub nonlinearity: NonlinearityArg,
    /// Report the last ICA iterate instead of failing when it does not converge.
    #[arg(long)]
    pub accept_unconverged: bool,
    /// Zero connection strengths below this magnitude.
    #[arg(long)]
    pub prune: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML simulation spec with a `[sem]` or `[corpus]` table.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Metrics CSV written by `train`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Effects report written by `causal`.
    #[arg(long)]
    pub effects: Option<PathBuf>,
}

/// Exit code for a library error: 1 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        1
    } else {
        2
    }
}

/// Parse `args` (including the program name), run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand(args, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Keywords(a) => cmd_keywords(a),
        Command::Train(a) => cmd_train_eval(a),
        Command::Classify(a) => cmd_classify_aggregate(a),
        Command::Causal(a) => cmd_causal(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
