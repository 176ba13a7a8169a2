use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "seqbreak", version, about = "Sequential and retrospective structural-break detection")]
pub struct Cli {
    /// Master seed for all randomness (falls back to SEQBREAK_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monitor the observations after a historical period for a break.
    Monitor(MonitorArgs),
    /// OLS fit of the AR(1) or mean model with Newey-West standard errors.
    Fit(FitArgs),
    /// Quasi-ML GARCH(1,1) or AR(1)-GARCH(1,1) fit; writes standardized residuals.
    GarchFit(GarchArgs),
    /// Full-sample break dating: least squares, dynamic programming, sup-F, CUSUM of squares.
    Retro(RetroArgs),
    /// Simulate boundary critical values from the limiting process.
    SimulateCriticalValues(CritArgs),
    /// Empirical size of one experiment config (no break).
    McSize(ConfigArgs),
    /// Empirical power of one experiment config (with a break).
    McPower(ConfigArgs),
    /// Run-length distribution and delay density of one experiment config.
    McArl(ConfigArgs),
    /// Power over a grid of historical sizes (`n_grid` in the config or `--n-grid`).
    McCurve(CurveArgs),
    /// Regenerate one of the reference tables.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FrequencyArg {
    Weekly,
    Monthly,
    Untagged,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file holding the series.
    #[arg(long)]
    pub data: PathBuf,
    /// Value column: header name or 0-based index.
    #[arg(long, default_value = "value")]
    pub column: String,
    /// Period label column: header name or 0-based index.
    #[arg(long)]
    pub label_column: Option<String>,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, value_enum, default_value = "untagged")]
    pub frequency: FrequencyArg,
    /// Difference the series this many times before use.
    #[arg(long, default_value_t = 0)]
    pub difference: usize,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Historical sample size.
    #[arg(long, conflicts_with = "historical_end", required_unless_present = "historical_end")]
    pub n: Option<usize>,
    /// Label of the last historical observation (alternative to `--n`).
    #[arg(long)]
    pub historical_end: Option<String>,
    /// Monitoring horizon T (the monitoring period ends at ceil(nT)).
    #[arg(long = "horizon", short = 'T', default_value_t = 2.0)]
    pub horizon: f64,
    #[arg(long, default_value = "ols-cusum")]
    pub detector: String,
    #[arg(long, default_value = "b3")]
    pub boundary: String,
    /// Boundary constant (default: the boundary's 5% value).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "ar1")]
    pub model: String,
    /// Window fraction for ME and OLS-MOSUM.
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    /// Evaluate the whole monitoring period after the first crossing.
    #[arg(long)]
    pub complete_path: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "ar1")]
    pub model: String,
    /// Fit on the first n observations only.
    #[arg(long)]
    pub n: Option<usize>,
    /// Newey-West truncation lag (default: 12 for weekly/monthly, otherwise floor(4 (n/100)^(2/9))).
    #[arg(long)]
    pub hac_lags: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GarchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Add an AR(1) term to the mean equation.
    #[arg(long)]
    pub ar: bool,
    /// Write standardized residuals even if the optimiser did not converge.
    #[arg(long)]
    pub allow_unconverged: bool,
}

#[derive(Debug, Args)]
pub struct RetroArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "mean")]
    pub design: String,
    #[arg(long, default_value_t = 3)]
    pub max_breaks: usize,
    /// Minimum segment length as a fraction of the sample.
    #[arg(long, default_value_t = 0.15)]
    pub trim: f64,
    /// Critical value for the sup-F test.
    #[arg(long)]
    pub critical: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CritArgs {
    #[arg(long, default_value = "b3")]
    pub boundary: String,
    /// Limit process: re, cusum, me or mosum.
    #[arg(long, default_value = "re")]
    pub process: String,
    /// Significance levels.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10])]
    pub alpha: Vec<f64>,
    /// Monitoring horizons T.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    pub horizons: Vec<f64>,
    /// Simulated paths.
    #[arg(long, default_value_t = 25_000)]
    pub reps: usize,
    /// Grid steps per unit of time.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Window fraction for the ME and MOSUM processes.
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    /// For b6: gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Historical sizes, overriding `n_grid` in the config.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
    Table3,
    Table4,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub table: Table,
    /// Fraction of the full replication count; below 1 it also drops the
    /// historical sizes above 1000 * scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Replications per cell (overrides the scaled default).
    #[arg(long)]
    pub reps: Option<usize>,
}
