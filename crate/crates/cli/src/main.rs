mod commands;
mod config;
mod error;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, Settings};
use crate::error::CliError;

/// Density estimation by adiabatic CDF fitting and parameter-shift differentiation.
#[derive(Debug, Parser)]
#[command(name = "adiabatic-pdf", version)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Distribution: gamma:ALPHA:BETA, mixture, mixture:W,..:M,..:S,.. or file:PATH.
    #[arg(long, global = true)]
    dist: Option<String>,
    /// Sample size drawn by `sample`.
    #[arg(long = "n", global = true, value_name = "N")]
    n_sample: Option<usize>,
    #[arg(long, global = true)]
    dtau: Option<f64>,
    #[arg(long, global = true)]
    total_time: Option<f64>,
    /// Number of schedule coefficients p.
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// monomial or bernstein.
    #[arg(long, global = true)]
    basis: Option<String>,
    /// exact-step or second-order-split.
    #[arg(long, global = true)]
    stepper: Option<String>,
    /// Number of empirical-CDF training points.
    #[arg(long, global = true)]
    ntrain: Option<usize>,
    #[arg(long, global = true)]
    j_thresh: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    sigma0: Option<f64>,
    #[arg(long, global = true)]
    population: Option<usize>,
    /// exact or shots.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// N points on [0, 1], or START:END:N.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// top-hat or exponential.
    #[arg(long, global = true)]
    kernel: Option<String>,
}

impl Overrides {
    fn into_config(self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            dist: self.dist,
            n_sample: self.n_sample,
            dtau: self.dtau,
            total_time: self.total_time,
            degree: self.degree,
            basis: self.basis,
            stepper: self.stepper,
            ntrain: self.ntrain,
            j_thresh: self.j_thresh,
            max_iters: self.max_iters,
            sigma0: self.sigma0,
            population: self.population,
            mode: self.mode,
            shots: self.shots,
            repeats: self.repeats,
            grid: self.grid,
            kernel: self.kernel,
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Cdf,
    Pdf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample and write it one value per line.
    Sample {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a schedule on a sample's empirical CDF.
    Fit {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the trained evolution's trajectory as CSV.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Evaluate the fitted CDF or PDF on a grid.
    Eval {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, value_enum)]
        what: Quantity,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the circuit angles of a fit on a grid.
    Angles {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an evaluation table with the truth.
    Metrics {
        /// Table written by `eval` or `kde`.
        #[arg(long)]
        eval: PathBuf,
        /// A distribution (see --dist), file:PATH for a sample, or csv:PATH for another table.
        #[arg(long)]
        truth: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel density estimate with a cross-validated bandwidth.
    Kde {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let settings = Settings::resolve(cli.overrides.into_config().or(file))?;
    match cli.command {
        Command::Sample { out } => commands::sample(&settings, &out),
        Command::Fit {
            sample,
            out,
            trajectory,
        } => commands::fit(&settings, &sample, &out, trajectory.as_deref()),
        Command::Eval { fit, what, out } => commands::eval(&settings, &fit, what, &out),
        Command::Angles { fit, out } => commands::angles(&settings, &fit, &out),
        Command::Metrics { eval, truth, out } => commands::metrics(&eval, &truth, &out),
        Command::Kde { sample, out } => commands::kde(&settings, &sample, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
