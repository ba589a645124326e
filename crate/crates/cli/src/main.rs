//! Command-line front end: wires ingestion, estimation, inference,
//! diagnostics, and simulation into four subcommands emitting plot-ready
//! CSV or JSON.

mod cmd;
mod output;
mod simconfig;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "paneltrial",
    version,
    about = "Cohort-based difference-in-differences for staggered policy adoption",
    long_about = "Cohort-based difference-in-differences for staggered policy adoption.\n\
                  Inputs are a cumulative-count CSV (date,state,cases) and a policy CSV\n\
                  (state,order_date; empty date = never adopted). Defaults follow the\n\
                  bundled fixture: case threshold 10, reference offset -1, never-treated\n\
                  comparisons."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for jackknife replicates (0 = library default);
    /// results are identical regardless
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Pre/post 2x2 table for one adoption cohort, log and percent scales
    ///
    /// Example: table1 --cases data/cases.csv --policy data/policy.csv
    /// --cohort 2020-03-23 --pre 2020-03-08:2020-03-22
    /// --post 2020-03-23:2020-04-26 --outcome log-growth
    Table1(Table1Args),
    /// Event-study estimates: one cohort with --cohort, nested otherwise
    Estimate(EstimateArgs),
    /// Per-unit adoption timing in calendar time and case time
    Timing(TimingArgs),
    /// Draw a synthetic panel with known effects; optionally estimate on it
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct InputArgs {
    /// Cases CSV: header `date,state,cases`, cumulative counts
    #[arg(long)]
    pub cases: PathBuf,
    /// Policy CSV: header `state,order_date`, empty date = never treated
    #[arg(long)]
    pub policy: PathBuf,
}

#[derive(Args)]
pub struct OutputArgs {
    /// Write results here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the exclusion report here instead of stderr
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Adoption date of the cohort to tabulate (YYYY-MM-DD)
    #[arg(long)]
    pub cohort: String,
    /// Pre window as START:END dates, e.g. 2020-03-08:2020-03-22
    #[arg(long)]
    pub pre: String,
    /// Post window as START:END dates, e.g. 2020-03-23:2020-04-26
    #[arg(long)]
    pub post: String,
    /// Outcome scale: log-growth, log-cases, raw-cases, raw-growth
    #[arg(long, default_value = "log-growth")]
    pub outcome: String,
    /// Comparison pool: never-treated or not-yet-treated
    #[arg(long, default_value = "never-treated")]
    pub comparison: String,
    /// Reference offset recorded in the output metadata
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub reference_offset: i64,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Outcome scale: log-growth, log-cases, raw-cases, raw-growth
    #[arg(long, default_value = "log-growth")]
    pub outcome: String,
    /// Time axis: calendar, or case (days since the threshold crossing)
    #[arg(long, default_value = "calendar")]
    pub time_mode: String,
    /// Cumulative count defining case-time zero
    #[arg(long, default_value_t = 10)]
    pub case_threshold: u64,
    /// Comparison pool: never-treated (default) or not-yet-treated.
    /// Not-yet-treated pools change composition over follow-up; inspect
    /// n_cohorts per event time when using it.
    #[arg(long, default_value = "never-treated")]
    pub comparison: String,
    /// Single-trial mode: adoption date (calendar) or integer (case time)
    #[arg(long)]
    pub cohort: Option<String>,
    /// Truncate event times below this value
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<i64>,
    /// Truncate event times above this value
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<i64>,
    /// Event time normalized to zero (must be negative)
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub reference_offset: i64,
    /// Suppress (cohort, event-time) cells with fewer observations
    #[arg(long, default_value_t = 1)]
    pub min_cell_size: usize,
    /// Skip jackknife standard errors
    #[arg(long)]
    pub no_se: bool,
    /// Print a pre-trend placebo summary to stderr
    #[arg(long)]
    pub diagnose: bool,
    /// Write the pre-trend report as JSON to this path
    #[arg(long)]
    pub diagnose_json: Option<PathBuf>,
    /// Write per-cohort event studies to this path
    #[arg(long)]
    pub cohort_detail: Option<PathBuf>,
}

#[derive(Args)]
pub struct TimingArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Cumulative count defining case-time zero
    #[arg(long, default_value_t = 10)]
    pub threshold: u64,
    /// Row order: calendar or case adoption
    #[arg(long, default_value = "calendar")]
    pub order: String,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Flat key = value config file (see README for the keys)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for panel.csv, truth.csv, and estimation output
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run the estimators on the drawn panel and write the
    /// estimate-versus-truth comparison
    #[arg(long)]
    pub and_estimate: bool,
    #[arg(long)]
    pub n_units: Option<usize>,
    #[arg(long)]
    pub n_periods: Option<usize>,
    /// Units 0..n-1 adopt (combine with --first-adoption/--adoption-spacing)
    #[arg(long)]
    pub n_treated: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub first_adoption: Option<i64>,
    #[arg(long)]
    pub adoption_spacing: Option<i64>,
    /// Explicit per-unit adoption list, e.g. 5,5,8,never
    #[arg(long)]
    pub adoption: Option<String>,
    /// Constant treatment effect
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Effect by event time, e.g. 0.1,0.2,0.3 (last value held)
    #[arg(long)]
    pub tau_table: Option<String>,
    /// Extra per-period drift for eventually-treated units
    #[arg(long, allow_hyphen_values = true)]
    pub trend: Option<f64>,
    /// Effect onset this many periods before adoption
    #[arg(long)]
    pub anticipation: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // per-process pool; replicate order is fixed so results do not
        // depend on the thread count
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = match cli.command {
        Command::Table1(args) => cmd::table1(args),
        Command::Estimate(args) => cmd::estimate(args),
        Command::Timing(args) => cmd::timing(args),
        Command::Simulate(args) => cmd::simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for input/configuration problems, 1 for estimation-time failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    use paneltrial::Error;
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::NoData(_)
            | Error::MissingReference { .. }
            | Error::InferenceUnavailable { .. } => 1,
            _ => 2,
        };
    }
    2
}
