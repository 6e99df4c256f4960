//! `adr-signal`: reproducible drug-event signal detection runs.
//!
//! Every subcommand reads its inputs, writes all results as files into
//! `--out` alongside a run manifest, and prints only a short human summary
//! to stdout. Re-running a command on identical inputs rewrites the output
//! files byte for byte; only the manifest timestamp moves.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error.

mod commands;
mod manifest;
mod suggest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "adr-signal",
    version,
    about = "Drug-event signal detection over GP and spontaneous-report data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic GP and SRS datasets with planted effects
    Synth(SynthArgs),
    /// Rank events by disproportionality for one drug
    Signal(SignalArgs),
    /// ROC analysis of a ranking against known adverse events
    Roc(RocArgs),
    /// Significance comparison of two AUC result files
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Generator configuration file (synth.json)
    #[arg(long)]
    pub config: PathBuf,

    /// Override the configured number of patients
    #[arg(long)]
    pub patients: Option<u32>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Gp,
    Srs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ror,
    Prr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroPolicyArg {
    Strict,
    Haldane,
}

#[derive(Args)]
pub struct InputArgs {
    /// Database kind to analyse
    #[arg(long, value_enum)]
    pub source: Source,

    /// GP patients file (patients.csv)
    #[arg(long, required_if_eq("source", "gp"))]
    pub patients: Option<PathBuf>,

    /// GP prescriptions file (prescriptions.csv)
    #[arg(long, required_if_eq("source", "gp"))]
    pub prescriptions: Option<PathBuf>,

    /// GP clinical events file (events.csv)
    #[arg(long, required_if_eq("source", "gp"))]
    pub events: Option<PathBuf>,

    /// SRS reports file (srs_reports.csv)
    #[arg(long, required_if_eq("source", "srs"))]
    pub reports: Option<PathBuf>,

    /// Days after each prescription that count as suspect, or "inf".
    /// GP sources only.
    #[arg(long, required_if_eq("source", "gp"))]
    pub tcrit: Option<String>,
}

#[derive(Args)]
pub struct SignalArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Drug of interest
    #[arg(long)]
    pub drug: String,

    #[arg(long, value_enum)]
    pub method: MethodArg,

    /// Handling of empty contingency cells
    #[arg(long, value_enum, default_value = "strict")]
    pub zero_policy: ZeroPolicyArg,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub signal: SignalArgs,

    /// JSON file mapping known adverse-event names to their code lists
    #[arg(long)]
    pub known: PathBuf,

    /// Also report the partial AUC over fpr <= this bound
    #[arg(long)]
    pub fpr_max: Option<f64>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// First AUC result file (auc.json of a roc run)
    pub first: PathBuf,
    /// Second AUC result file
    pub second: PathBuf,

    /// Correlation between the two estimates (0 = independent datasets)
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// Errors carrying their process exit code.
pub enum CliError {
    /// Bad arguments or configuration: exit 2.
    Usage(String),
    /// Unreadable or invalid data: exit 3.
    Data(String),
}

impl CliError {
    fn usage(err: impl ToString) -> Self {
        CliError::Usage(err.to_string())
    }

    fn data(err: impl ToString) -> Self {
        CliError::Data(err.to_string())
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("ADR_SIGNAL_THREADS") {
        let n: usize = match value.trim().parse() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("warning: ignoring unparseable ADR_SIGNAL_THREADS={value:?}");
                return;
            }
        };
        if n > 0 {
            // 0 = automatic, matching rayon's default
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::run_synth(&args),
        Command::Signal(args) => commands::run_signal(&args),
        Command::Roc(args) => commands::run_roc(&args),
        Command::Compare(args) => commands::run_compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
