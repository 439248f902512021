mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use xplain::Error;

/// Explainable benchmarking of modular optimization heuristics.
#[derive(Debug, Parser)]
#[command(name = "xplain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect a configuration space: grid size, enumeration or sampling.
    Space(SpaceArgs),
    /// Execute an experiment plan and write the sorted run file.
    Run(RunArgs),
    /// Fit one surrogate per (fid, dim) and write SHAP attributions.
    Explain(ExplainArgs),
    /// Rankings, gains, module effects and hall of fame.
    Rank(RankArgs),
    /// Compare two frameworks run on the same functions.
    Compare(CompareArgs),
    /// Structural-bias test of one configuration on f0.
    Bias(BiasArgs),
    /// Feature-based algorithm configuration with cross-validation.
    Aac(AacArgs),
    /// Bundle every analysis of a run file into one directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("action").required(true).args(["count", "enumerate", "sample"]))]
pub struct SpaceArgs {
    /// Space file, or `builtin:<family>`.
    #[arg(long)]
    pub file: String,
    /// Print the number of grid configurations.
    #[arg(long)]
    pub count: bool,
    /// Print every grid configuration as CSV.
    #[arg(long)]
    pub enumerate: bool,
    /// Print N uniformly sampled configurations as CSV.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write one best-so-far trajectory CSV per run into this directory.
    #[arg(long, value_name = "DIR")]
    pub trajectories: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub runs: PathBuf,
    /// Space file or `builtin:<family>` (default: the run file's family).
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub trees: usize,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.3)]
    pub eta: f64,
    /// Also draw one swarm plot per model.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Hall-of-fame size per dimension.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Dimension to compare (default: every dimension both files share).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// Space file or `builtin:<family>`.
    #[arg(long)]
    pub space: String,
    /// Configuration id, or `default`.
    #[arg(long)]
    pub config_id: String,
    /// Independent runs on f0.
    #[arg(long, default_value_t = xplain::bias::DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = xplain::bias::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = xplain::bias::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AacArgs {
    #[arg(long)]
    pub runs: PathBuf,
    /// Landscape feature table; computed and written here when missing.
    #[arg(long)]
    pub features: PathBuf,
    /// Cross-validation: `lofo` or `loio`.
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = xplain::ela::DEFAULT_MAX_DEPTH)]
    pub depth: usize,
    /// Trees in the random forest.
    #[arg(long, default_value_t = 50)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample size of the landscape design when features are computed.
    #[arg(long, default_value_t = xplain::ela::DEFAULT_SAMPLES)]
    pub doe: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub space: Option<String>,
    /// Landscape feature table; adds the AAC section.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Second run file; adds the comparison section.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// f0 runs for a bias test of each dimension's avg-best configuration.
    #[arg(long)]
    pub bias_runs: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub svg: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 1,
        e if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let version: &'static str =
        Box::leak(format!("{} (feature order {})", xplain::VERSION, xplain::runner::feature_order_hash()).into_boxed_str());
    let matches = match Cli::command().version(version).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e.to_string().lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}
