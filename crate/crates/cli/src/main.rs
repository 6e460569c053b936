//! `symtomo` command-line tool: synthesize datasets, fit states, analyze
//! reconstructions.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "symtomo", version, about = "Permutationally invariant state tomography")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic dataset from the six-qubit noise model or a state file.
    Synth(SynthArgs),
    /// Maximum-likelihood reconstruction, optionally with random setting subsets.
    Fit(FitArgs),
    /// Dicke spectrum, noise parameters, QFI, witness and bootstrap errors.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Pi,
    Full,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "pi")]
    pub scheme: SchemeArg,
    /// Noise fraction of the model state.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub q: f64,
    /// Coupling asymmetry of the model state.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Sample from this state file instead of the noise model.
    #[arg(long, conflicts_with_all = ["q", "lambda"])]
    pub state: Option<PathBuf>,
    /// Events per setting; scientific notation such as 1e5 is accepted.
    #[arg(long, allow_negative_numbers = true)]
    pub events: f64,
    #[arg(long)]
    pub seed: u64,
    /// Dataset file (default: dataset.json in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the sampled state.
    #[arg(long)]
    pub state_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub backtracking_shrink: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Subset sizes for the compressed-sensing study, e.g. `--subset 12,16`.
    #[arg(long, value_delimiter = ',')]
    pub subset: Vec<usize>,
    /// Random subsets per size.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Seed for the subset draws.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// State file (default: state.json in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run report (default: fit_report.json in the output directory).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fidelity histogram of the subset study as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, required_unless_present = "dataset")]
    pub state: Option<PathBuf>,
    /// Counts; fitted when no state is given, required for the bootstrap.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Bootstrap replicas.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Analysis report (default: analysis.json in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Statistic table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Analyze(a) => commands::analyze(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
