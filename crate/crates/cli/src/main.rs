//! `bipotts`: experiments on the Potts model on `K_{n,n}`.
//!
//! Exit codes: 0 success, 1 verification failure or runtime error,
//! 2 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad flags, bad config or invalid parameter values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "bipotts", version, about = "Potts model on the complete bipartite graph K_{n,n}")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "POTTS_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// JSON config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (outputs do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Critical points, mean-field branch and macrostates.
    Phase(PhaseArgs),
    /// Run the heat-bath chain and record magnetizations.
    Simulate(SimulateArgs),
    /// Run greedy couplings and report coupling times.
    Couple(CoupleArgs),
    /// Contraction ratios of the aggregate g-variation.
    Paths(PathsArgs),
    /// Mixing experiments.
    #[command(subcommand)]
    Mix(MixCommand),
    /// Oracle comparison suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long)]
    pub q: Option<usize>,
    /// Inverse temperature for s and the macrostates [default: beta_c].
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Solver tolerance [default: 1e-12].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write the beta sweep CSV.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long)]
    pub beta_min: Option<f64>,
    /// [default: 2 beta_c]
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Sweep points [default: 201].
    #[arg(long)]
    pub points: Option<usize>,
    /// Also write the q = 3 free-energy landscape CSV.
    #[arg(long)]
    pub landscape: bool,
    /// Landscape subdivisions per simplex edge [default: 60].
    #[arg(long)]
    pub grid_steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// [default: 10000]
    #[arg(long)]
    pub steps: Option<u64>,
    /// [default: 100]
    #[arg(long)]
    pub record_every: Option<u64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// `uniform`, `ordered:k` or a JSON file `{"left": [...], "right": [...]}` [default: uniform].
    #[arg(long)]
    pub init: Option<String>,
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// [default: 1000000]
    #[arg(long)]
    pub t_max: Option<u64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Same forms as `simulate --init` [default: ordered:0].
    #[arg(long)]
    pub init_x: Option<String>,
    /// [default: ordered:1]
    #[arg(long)]
    pub init_y: Option<String>,
    /// Record the distance every this many steps into a trace CSV; 0 disables [default: 0].
    #[arg(long)]
    pub trace_stride: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PathsArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Random start pairs [default: 100].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Use diagonal starts on a q = 3 simplex grid with this many subdivisions instead of random starts.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Ends are drawn within this l1 distance of (rho, rho) [default: 0.05].
    #[arg(long)]
    pub end_radius: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum MixCommand {
    /// Exact distance to stationarity of the magnetization chain.
    Exact(MixExactArgs),
    /// Coupling time against n log n.
    Scaling(MixScalingArgs),
    /// Escape times from an ordered start.
    Slow(MixSlowArgs),
}

#[derive(Args, Debug)]
pub struct MixExactArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// [default: 200]
    #[arg(long)]
    pub t_max: Option<u64>,
    /// Replicas for the coupling upper bound; 0 skips it [default: 0].
    #[arg(long)]
    pub sandwich_replicas: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct MixScalingArgs {
    #[arg(long)]
    pub q: Option<usize>,
    /// Inverse temperature; alternatively give --beta-frac.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// beta = beta_frac * beta_s.
    #[arg(long)]
    pub beta_frac: Option<f64>,
    /// Comma-separated sizes [default: 32,64,128,256].
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// [default: 200]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct MixSlowArgs {
    #[arg(long)]
    pub q: Option<usize>,
    /// Inverse temperature; alternatively give --beta-offset.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// beta = beta_c + beta_offset.
    #[arg(long, allow_hyphen_values = true)]
    pub beta_offset: Option<f64>,
    /// [default: 64,128,256]
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// [default: 100]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Step cap per replica [default: 10000000].
    #[arg(long)]
    pub cap: Option<u64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// stationarity, kernel-exactness, duality, coupling-marginals, path-audit or all [default: all].
    #[arg(long)]
    pub suite: Option<String>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also dump the exact kernel and magnetization pushforward at --q --n --beta.
    #[arg(long)]
    pub dump: bool,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
}

/// Whether a completed run's checks passed.
pub enum Outcome {
    Ok,
    VerificationFailed,
}

fn is_usage(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<bipotts::Error>(),
        Some(
            bipotts::Error::InvalidParameter(_)
                | bipotts::Error::Dimension(_)
                | bipotts::Error::NotNormalized(_)
                | bipotts::Error::Unsupported(_)
                | bipotts::Error::Infeasible { .. }
        )
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
