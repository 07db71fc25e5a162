//! `catmc`: generate synthetic data, fit links, complete matrices, evaluate
//! predictions, evaluate error bounds and run sample-size sweeps.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use catmc::Error;

#[derive(Parser, Debug)]
#[command(name = "catmc", version, about = "Categorical matrix completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a low-rank ground truth and categorical observations of it.
    Generate(GenerateArgs),
    /// Fit a multinomial-logit link from `x<TAB>k` training pairs.
    Fit(FitArgs),
    /// Recover the underlying matrix from observations.
    Solve(SolveArgs),
    /// Score predictions against held-out observations.
    Eval(EvalArgs),
    /// Evaluate the upper and lower error bounds.
    Bounds(BoundsArgs),
    /// Measure how the recovery error decays with the number of observations.
    Sweep(SweepArgs),
    /// Run the fit / complete / test protocol on a MovieLens `u.data` file.
    Movielens(MovieLensArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Categorical maximum likelihood.
    Categorical,
    /// Least squares on the labels, rounded to the nearest label.
    Real,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub d1: usize,
    #[arg(long)]
    pub d2: usize,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Expected number of observed cells.
    #[arg(long)]
    pub m: f64,
    /// Number of categories.
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub k: usize,
    /// Link family JSON file, or `default`.
    #[arg(long, default_value = "default")]
    pub family: String,
    /// Comma-separated category labels; defaults to 1..K.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct FitArgs {
    /// Training pairs, `x<TAB>k` with 1-based k.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long = "K", alias = "k")]
    pub k: usize,
    /// Ridge weight on the link parameters.
    #[arg(long, default_value_t = 1e-6)]
    pub reg: f64,
    /// Optional JSON optimizer settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SolveArgs {
    /// Observations, `i<TAB>j<TAB>label` with 0-based indices.
    #[arg(long)]
    pub obs: PathBuf,
    /// Link family JSON file, or `default`. Required for the categorical method.
    #[arg(long, default_value = "default")]
    pub family: String,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub rank: usize,
    /// Matrix rows; defaults to the largest observed row index plus one.
    #[arg(long)]
    pub d1: Option<usize>,
    /// Matrix columns; defaults to the largest observed column index plus one.
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub labels: Option<String>,
    /// Number of categories when the family is `default`.
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub k: usize,
    /// Optional JSON solver settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Categorical)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct EvalArgs {
    /// Held-out observations, `i<TAB>j<TAB>label`.
    #[arg(long)]
    pub test: PathBuf,
    /// Recovered matrix to turn into predictions.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    pub estimate: Option<PathBuf>,
    /// Matrix of predicted labels, used as is.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    pub family: String,
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub labels: Option<String>,
    /// Clamp estimates to `[-alpha, alpha]` before prediction.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Categorical)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct BoundsArgs {
    #[arg(long, default_value = "default")]
    pub family: String,
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub d1: usize,
    #[arg(long)]
    pub d2: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    /// Grid points for the smoothness constants.
    #[arg(long, default_value_t = 2001)]
    pub grid_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    pub d1: usize,
    #[arg(long, default_value_t = 100)]
    pub d2: usize,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
    /// Comma-separated expected observation counts, each at most d1 * d2.
    #[arg(long, default_value = "2000,4000,8000,10000")]
    pub m_grid: String,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long, default_value = "default")]
    pub family: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub c_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 2001)]
    pub grid_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct MovieLensArgs {
    /// Tab-separated `user item rating timestamp` file.
    #[arg(long)]
    pub udata: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub n_fit: usize,
    #[arg(long, default_value_t = 5000)]
    pub n_test: usize,
    /// Ratings to complete from; defaults to all remaining ratings.
    #[arg(long)]
    pub n_solve: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub reg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status for a library error: 2 for bad input, 1 for runtime failures.
fn exit_status(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::Unsupported(_)
        | Error::DegenerateFamily(_)
        | Error::DegenerateData(_)
        | Error::Parse { .. }
        | Error::Json(_) => 2,
        Error::Numeric(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Solve(a) => commands::solve(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Movielens(a) => commands::movielens(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
