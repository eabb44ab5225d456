mod commands;
mod errors;
mod ingest;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use errors::CliResult;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "simfex",
    version,
    about = "Measurement-error correction for regressions on categorized covariates",
    long_about = "Estimates the misclassification structure induced by measurement error in a \
                  categorized covariate from replicate measurements, and corrects regression \
                  coefficients by simulation-free extrapolation (with naive and MCSIMEX* \
                  comparators).\n\nExit codes: 0 success, 2 configuration error, 3 data error, \
                  4 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the misclassification matrix and category probabilities
    Misclass(MisclassArgs),
    /// Point estimates: naive, MCSIMEX* and SIMFEX coefficients
    Fit(FitArgs),
    /// Fit plus bootstrap standard errors, confidence intervals and p-values
    Bootstrap(BootstrapArgs),
    /// Run a Monte Carlo study defined by a config file
    Simulate(StudyArgs),
    /// Run the study across the noise-to-signal ratios listed in the config
    Sweep(StudyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// machine-readable CSV only
    Csv,
    /// CSV plus aligned text tables
    Table,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory (created if absent)
    #[arg(long, default_value = "simfex-out")]
    out: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct DataArgs {
    /// Input file: delimiter-separated text with a header row
    #[arg(long)]
    input: PathBuf,
    /// Column holding the contaminated covariate W
    #[arg(long)]
    covariate: String,
    /// Replicate measurement columns (comma separated, e.g. w1,w2)
    #[arg(long, value_delimiter = ',')]
    replicates: Vec<String>,
    /// Precisely measured covariate columns (comma separated)
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Discrete grouping column for the correlated-covariate contrast variant
    #[arg(long)]
    group: Option<String>,
    /// Number of categories J; cutpoints become sample quantiles of W
    #[arg(long, conflicts_with = "cutpoints")]
    categories: Option<usize>,
    /// Explicit cutpoints (comma separated, strictly increasing)
    #[arg(long, value_delimiter = ',')]
    cutpoints: Option<Vec<f64>>,
}

#[derive(Args)]
struct MisclassArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Response column
    #[arg(long)]
    response: String,
    /// Link function of the misspecified model
    #[arg(long)]
    link: String,
    /// Exponent grid for the extrapolation step
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 1.5, 2.0])]
    eta_grid: Vec<f64>,
    /// Extrapolation function family
    #[arg(long, default_value = "quadratic")]
    extrapolant: String,
    /// Estimation methods to run
    #[arg(long, value_delimiter = ',', default_values_t = default_methods())]
    methods: Vec<String>,
    /// Pseudo-datasets per grid point for MCSIMEX*
    #[arg(long, default_value_t = 100)]
    mcsimex_b: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn default_methods() -> Vec<String> {
    vec!["naive".into(), "mcsimex".into(), "simfex".into()]
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 500)]
    boot: usize,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override: Monte Carlo repetitions
    #[arg(long)]
    reps: Option<usize>,
    /// Override: bootstrap resamples (0 disables SIMFEX intervals)
    #[arg(long)]
    boot: Option<usize>,
    /// Override: RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override: methods to run
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() {
    let cli = Cli::parse();
    let result: CliResult<()> = match cli.command {
        Command::Misclass(args) => commands::misclass(args),
        Command::Fit(args) => commands::fit(args),
        Command::Bootstrap(args) => commands::bootstrap(args),
        Command::Simulate(args) => commands::study(args, false),
        Command::Sweep(args) => commands::study(args, true),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
