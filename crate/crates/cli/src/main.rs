//! `pcrle`: sample data, fit and test, run sweeps, sparsify graphs.
//!
//! Exit codes: 0 success, 2 usage/config/malformed input, 3 numerical failure.

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcrle::graph::Kernel;
use pcrle::regress::Method;

#[derive(Parser, Debug)]
#[command(
    name = "pcrle",
    version,
    about = "PCR-LE estimation and testing on ε-neighborhood graphs"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random draw (sweeps default to the config's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweep replications.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "PCRLE_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a design and noisy responses and write them as CSV.
    Sample(SampleArgs),
    /// Fit one estimator to a data CSV.
    Fit(FitArgs),
    /// Run the goodness-of-fit test of `f0 = 0`.
    Test(TestArgs),
    /// Run a Monte-Carlo sweep described by a JSON config.
    Sweep(SweepArgs),
    /// Two-cluster comparison of PCR-LE against oracle-tuned baselines.
    ClusterDemo(ClusterArgs),
    /// Uniformly sparsify the ε-graph of a data CSV.
    Sparsify(SparsifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignArg {
    Cube,
    Circle,
    Cluster,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthArg {
    /// `M / ρ_k^{s/2} ψ_k` with `k = --index`.
    Eigenfunction,
    /// `+θ` left of 1/2 and `-θ` right of it.
    Cluster,
    Constant,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisArg {
    /// Neumann cosines on `[-1, 1]^d`.
    Cube,
    /// Fourier basis on the unit circle.
    Circle,
    /// Neumann cosines on `[0, 1]`.
    Interval,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value = "cube")]
    pub design: DesignArg,
    #[arg(long)]
    pub n: usize,
    /// Ambient dimension for the cube and circle designs.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Half-width of the cluster gap.
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, value_enum, default_value = "eigenfunction")]
    pub truth: TruthArg,
    #[arg(long, default_value_t = 2)]
    pub index: usize,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub value: f64,
    #[arg(long, default_value_t = 1)]
    pub s: u32,
    #[arg(long = "M", default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

/// Options shared by `fit` and `test`.
#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value = "boxcar")]
    pub kernel: Kernel,
    /// Population basis for spectral series and least squares.
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// Intrinsic dimension of the design; defaults to the column count.
    #[arg(long)]
    pub intrinsic_dim: Option<usize>,
    /// Fill missing tuning parameters from the rate-optimal rules, e.g.
    /// `--auto-tune s=1 M=1` (also accepts `c0=` and `C0=`).
    #[arg(long, num_args = 0.., value_name = "KEY=VALUE")]
    pub auto_tune: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: SolverArg,
    /// Eigenpair residual tolerance relative to the bound on `‖L‖`.
    #[arg(long, default_value_t = 1e-10)]
    pub eigen_tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverArg {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relative residual for the Laplacian-smoothing solve.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = "fit.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[arg(long, default_value = "pcr-le")]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub a: f64,
    #[arg(long, default_value = "test.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// JSON sweep config (see README for the schema).
    pub config: PathBuf,
    /// Resolve and validate the config, write the manifest, compute nothing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long, default_value_t = 5.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value = "cluster.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SparsifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value = "boxcar")]
    pub kernel: Kernel,
    #[arg(long)]
    pub intrinsic_dim: Option<usize>,
    /// Probability of keeping each edge.
    #[arg(long)]
    pub keep: f64,
    #[arg(long)]
    pub sigma_target: Option<f64>,
    #[arg(long, default_value = "edges.txt")]
    pub out: PathBuf,
}

/// Failure classes mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<pcrle::Error> for CliError {
    fn from(e: pcrle::Error) -> Self {
        match &e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            pcrle::Error::Parse { line, message } if *line > 1 => CliError::Usage(format!(
                "malformed input at line {line} (data row {}): {message}",
                line - 1
            )),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let parallel = matches!(cli.command, Command::Sweep(_) | Command::ClusterDemo(_));
    let threads = if parallel { cli.global.threads.unwrap_or(0) } else { 1 };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let g = &cli.global;
    let res = match &cli.command {
        Command::Sample(a) => commands::sample(g, a),
        Command::Fit(a) => commands::fit(g, a),
        Command::Test(a) => commands::test(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::ClusterDemo(a) => commands::cluster_demo(g, a),
        Command::Sparsify(a) => commands::sparsify(g, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
