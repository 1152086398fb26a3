//! `nonstat`: change point detection, segment-wise simulation and
//! rolling-horizon dispatch from the command line.

mod commands;
mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use nonstat_core::Kernel;

/// Exit status for bad flags or flag values.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable data, invalid models and failed solves.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nonstat", version, about = "Covariance change points, segment-wise simulation and dispatch for multivariate series")]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a series into loess trend, seasonal means and residual.
    Decompose(DecomposeArgs),
    /// Detect covariance change points.
    Detect(DetectArgs),
    /// Simulate new realizations segment by segment.
    Simulate(SimulateArgs),
    /// Run the rolling-horizon economic dispatch on a wind speed series.
    Dispatch(DispatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotFormat {
    Svg,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV input, one column per component.
    #[arg(long)]
    pub input: PathBuf,

    /// The first row holds data, not column names.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct LoessArgs {
    /// Loess span as a fraction of the series.
    #[arg(long, default_value_t = 0.25, value_parser = span)]
    pub span: f64,

    /// Local polynomial degree.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub degree: u8,

    #[arg(long, default_value_t = 0)]
    pub robust_iters: usize,

    /// Seasonal period in rows; no seasonal term when absent.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub period: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Half-window N; defaults to T/6 clamped to [32, 256].
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub window: Option<u64>,

    #[arg(long, default_value = "epanechnikov", value_parser = kernel)]
    pub kernel: Kernel,

    /// Bandwidth constant c in h = c N^(-1/5).
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub bandwidth_c: f64,

    /// Fixed bandwidth, overriding the rate rule.
    #[arg(long, value_parser = positive)]
    pub bandwidth: Option<f64>,

    /// Bootstrap replicates for the null threshold.
    #[arg(long, default_value_t = 199, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_boot: u64,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub loess: LoessArgs,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum)]
    pub emit_plot: Option<PlotFormat>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub loess: LoessArgs,

    #[arg(long, default_value_t = 0.05, value_parser = probability)]
    pub alpha: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Remove trend and seasonal terms before detection; otherwise only the
    /// column means are removed.
    #[arg(long)]
    pub detrend: bool,

    /// JSON result file.
    #[arg(long)]
    pub output: PathBuf,

    /// Also write the deviation profile as CSV.
    #[arg(long)]
    pub profile: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub emit_plot: Option<PlotFormat>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub loess: LoessArgs,

    #[arg(long, default_value_t = 0.05, value_parser = probability)]
    pub alpha: f64,

    /// Number of simulations.
    #[arg(long = "n", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_sims: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Largest VAR order tried; defaults to min(10, (n-1)/(3L)).
    #[arg(long)]
    pub p_max: Option<usize>,

    /// Segments whose selected order is below this use the fitted VAR.
    #[arg(long, default_value_t = 5)]
    pub var_cutoff: usize,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum)]
    pub emit_plot: Option<PlotFormat>,
}

#[derive(Debug, Args)]
pub struct DispatchArgs {
    /// Network case JSON, or `ieee30` / `five-bus` for the bundled cases.
    #[arg(long)]
    pub case: String,

    /// Wind speeds in m/s, one column per wind generator.
    #[arg(long)]
    pub wind: PathBuf,

    /// Demand caps, one column per load and one row per period.
    #[arg(long)]
    pub demand: Option<PathBuf>,

    #[arg(long)]
    pub no_header: bool,

    /// Trace CSV.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 3.0, value_parser = non_negative)]
    pub cut_in: f64,
    #[arg(long, default_value_t = 13.0, value_parser = positive)]
    pub rated_speed: f64,
    #[arg(long, default_value_t = 25.0, value_parser = positive)]
    pub cut_out: f64,
    /// MW per wind unit.
    #[arg(long, default_value_t = 21.02, value_parser = positive)]
    pub rated_power: f64,

    /// Treat negative speeds (possible in simulated series) as calm.
    #[arg(long)]
    pub clip_negative: bool,

    #[arg(long, default_value_t = 1e-9, value_parser = positive)]
    pub tol: f64,

    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,

    #[arg(long, value_enum)]
    pub emit_plot: Option<PlotFormat>,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn span(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn kernel(s: &str) -> Result<Kernel, String> {
    s.parse().map_err(|_| format!("'{s}' is not one of epanechnikov, uniform, triangular"))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(nonstat_core::Error),
}

impl From<nonstat_core::Error> for CliError {
    fn from(e: nonstat_core::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NONSTAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("NONSTAT_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprintln!("error: missing subcommand or argument (see --help)");
                    EXIT_USAGE
                }
                _ => {
                    let msg = e.render().to_string();
                    eprintln!("{}", one_line(msg.lines().next().unwrap_or("error: invalid arguments")));
                    EXIT_USAGE
                }
            };
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();

    let result = configure_threads().and_then(|()| match cli.command {
        Command::Decompose(a) => commands::decompose(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Dispatch(a) => commands::dispatch(&a),
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {}", one_line(&m));
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            EXIT_DATA
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
