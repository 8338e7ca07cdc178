//! `bwopt`: run Bures-Wasserstein solvers on dataset files or generated
//! datasets, write traces and summaries, and export the barycenter SDP.

mod commands;
mod exit;
mod experiments;
mod input;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::exit::{code, CliError, CliResult};
use crate::input::GenArg;

#[derive(Parser, Debug)]
#[command(name = "bwopt", version, about = "First-order optimization on the Bures-Wasserstein manifold")]
struct Cli {
    /// Root seed; every random stream is derived from it by labeled hashing.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

/// Dataset source: a JSON file or a generator spec.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Dataset JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Generator spec, e.g. `method=1,n=50,d=5,alpha=1,beta=1000[,m=2][,seed=7]`
    /// or `method=known,n=100,d=20,delta=0.1`.
    #[arg(long)]
    pub gen: Option<GenArg>,
}

#[derive(Args, Debug)]
pub struct RunOpts {
    /// Iteration budget.
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Stop once the gradient norm falls to this value; 0 runs the full budget.
    #[arg(long)]
    pub grad_tol: Option<f64>,

    /// Initial point (point JSON); defaults to the first atom.
    #[arg(long)]
    pub start: Option<PathBuf>,

    /// Reference point (point JSON) for the `w2sq_to_ref` trace column.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,

    #[arg(long)]
    pub out_trace: Option<PathBuf>,

    #[arg(long)]
    pub out_summary: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wasserstein barycenter by Riemannian GD, or SGD with `--sgd`.
    Barycenter {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        sgd: bool,
    },
    /// Entropically regularized barycenter by Riemannian GD.
    Rbarycenter {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        gamma: f64,
        /// Box parameter: atoms must lie in [1/√κ, √κ]. Inferred when absent.
        #[arg(long)]
        kappa: Option<f64>,
        /// Step size; defaults to 1/(1 + 2γ√κ).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Smoothed geometric median by Riemannian GD with step ε.
    Median {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        epsilon: f64,
    },
    /// Euclidean projected GD, or projected SGD with `--stochastic`.
    Euclidean {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        stochastic: bool,
        /// Replaces the constant EGD step, or the numerator c of c/(n + 1) for SGD.
        #[arg(long)]
        step: Option<f64>,
        /// Projection box; defaults to the span of the atom spectra.
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
    },
    /// Generate a dataset and write it as JSON.
    GenData {
        #[arg(long)]
        gen: GenArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// GD passes until W₂²(Σ_t, Σ*) ≤ 10^-r var P, across dimensions.
    DimSweep {
        #[arg(long, value_delimiter = ',', default_value = "5,20,50")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1000.0)]
        kappa: f64,
        #[arg(long, default_value_t = 3)]
        r: i32,
        #[arg(long, default_value_t = 1)]
        method: u8,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median and barycenter shifts when a fraction of the atoms is scaled.
    Robustness {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.45)]
        fraction: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
        factors: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Median iteration budget; defaults to the guarantee formula.
        #[arg(long)]
        max_iters: Option<usize>,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the barycenter SDP in SDPA sparse format.
    SdpExport {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        /// Also solve by GD and report the plug-in objective and feasibility.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
    /// Check a trace CSV and/or summary JSON written by this tool.
    Validate {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("BW_THREADS") else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::new(code::USAGE, format!("BW_THREADS must be a positive integer, found {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(code::USAGE, e.to_string()))
}

fn run(cli: Cli) -> CliResult<u8> {
    init_threads()?;
    let seed = cli.seed;
    match cli.command {
        Command::Barycenter { source, run, sgd } => commands::barycenter(&source, &run, sgd, seed),
        Command::Rbarycenter { source, run, gamma, kappa, step } => {
            commands::rbarycenter(&source, &run, gamma, kappa, step, seed)
        }
        Command::Median { source, run, epsilon } => commands::median(&source, &run, epsilon, seed),
        Command::Euclidean { source, run, stochastic, step, lambda_min, lambda_max } => {
            commands::euclidean(&source, &run, stochastic, step, (lambda_min, lambda_max), seed)
        }
        Command::GenData { gen, out } => commands::gen_data(&gen, &out, seed),
        Command::DimSweep { dims, n, kappa, r, method, max_iters, out } => {
            experiments::dim_sweep(&dims, n, kappa, r, method, max_iters, out.as_deref(), seed)
        }
        Command::Robustness { source, fraction, factors, epsilon, max_iters, out } => {
            experiments::robustness(&source, fraction, &factors, epsilon, max_iters, out.as_deref(), seed)
        }
        Command::SdpExport { source, out, check, out_summary } => {
            experiments::sdp_export(&source, &out, check, out_summary.as_deref(), seed)
        }
        Command::Validate { trace, summary } => validate::run(trace.as_deref(), summary.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
