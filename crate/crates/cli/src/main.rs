//! `itl-ae`: train, sample from and evaluate ITL-regularised autoencoders.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Failure classes map onto exit codes 1 (validation) and 2 (runtime).
#[derive(Debug)]
pub struct CliError {
    pub runtime: bool,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            runtime: false,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            runtime: true,
            message: message.into(),
        }
    }
}

impl From<itl_ae::Error> for CliError {
    fn from(e: itl_ae::Error) -> Self {
        use itl_ae::Error as E;
        match e {
            E::NonFinite(_) | E::Io { .. } | E::Csv(_) | E::Json(_) => {
                CliError::runtime(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "itl-ae",
    version,
    about = "ITL divergence estimators and ITL-regularised autoencoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Prior overrides; unset fields fall back to the checkpoint's prior, then to `N(0, 5^2)`.
#[derive(Args, Clone, Debug, Default)]
pub struct PriorArgs {
    /// gaussian, laplacian or swiss_roll
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub prior_location: Option<f64>,
    /// Std (gaussian), diversity b (laplacian) or radius growth (swiss_roll)
    #[arg(long)]
    pub prior_scale: Option<f64>,
    #[arg(long)]
    pub prior_turns: Option<f64>,
    #[arg(long)]
    pub prior_noise_std: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder from a TOML run configuration
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the latent codes of a dataset (CSV or IDX images) to CSV
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// IDX label file to append as a `label` column
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode prior draws, or a linear walk between two latent points
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// "a1,a2,...;b1,b2,...;k": k evenly spaced latent points from a to b
        #[arg(long, allow_hyphen_values = true)]
        walk: Option<String>,
        #[command(flatten)]
        prior: PriorArgs,
    },
    /// Divergence between two CSV sample files, printed as JSON
    Divergence {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// euclidean or cauchy_schwarz
        #[arg(long, default_value = "euclidean")]
        kind: String,
    },
    /// Parzen log-likelihood of test data under samples generated by the decoder
    EvalLl {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test samples (CSV, or IDX images)
        #[arg(long)]
        test: PathBuf,
        /// Validation samples for choosing sigma; defaults to a split of --test
        #[arg(long)]
        validation: Option<PathBuf>,
        /// Fraction of --test held out for sigma selection when --validation is absent
        #[arg(long, default_value_t = 0.5)]
        validation_fraction: f64,
        #[arg(long, default_value_t = 10_000)]
        n_generated: usize,
        /// Explicit comma-separated sigma grid; overrides --grid-*
        #[arg(long, allow_hyphen_values = true)]
        sigma_grid: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        grid_min: f64,
        #[arg(long, default_value_t = 1.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for report.json and sigma_curve.csv
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
    },
    /// Draw samples from a prior into a CSV file
    SamplePrior {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config } => commands::train(&config),
        Command::Encode {
            checkpoint,
            data,
            labels,
            out,
        } => commands::encode(&checkpoint, &data, labels.as_deref(), &out),
        Command::Generate {
            checkpoint,
            n,
            out,
            seed,
            walk,
            prior,
        } => commands::generate(&checkpoint, n, &out, seed, walk.as_deref(), &prior),
        Command::Divergence { x, y, sigma, kind } => commands::divergence(&x, &y, sigma, &kind),
        Command::EvalLl {
            checkpoint,
            test,
            validation,
            validation_fraction,
            n_generated,
            sigma_grid,
            grid_min,
            grid_max,
            grid_points,
            seed,
            out_dir,
            prior,
        } => commands::eval_ll(&commands::EvalArgs {
            checkpoint,
            test,
            validation,
            validation_fraction,
            n_generated,
            sigma_grid,
            grid: (grid_min, grid_max, grid_points),
            seed,
            out_dir,
            prior,
        }),
        Command::SamplePrior {
            dim,
            n,
            seed,
            out,
            prior,
        } => commands::sample_prior(dim, n, seed, &out, &prior),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(if e.runtime { 2 } else { 1 })
        }
    }
}
