use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use windmarket::counterfactual::{Window, DEFAULT_BIN_WIDTH, DEFAULT_MIN_N};

mod exit;
mod ingest_cmd;
mod output;
mod report;
mod store;
mod synth_cmd;

use exit::Exit;

/// Wind and balancing-market analytics over half-hourly settlement data.
#[derive(Debug, Parser)]
#[command(name = "windmarket", version)]
struct Cli {
    /// Clock-change table (`YYYY-MM-DD,spring|fall` per line); defaults to the bundled UK table.
    #[arg(long, global = true, value_name = "PATH")]
    clock_rule: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate raw CSV inputs and write a normalized store.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus with a ground-truth manifest.
    Synth(SynthArgs),
    /// Compute an analysis from a store and write CSV output.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct IngestArgs {
    /// Directory holding inputs under their conventional names (`generation.csv`, ...).
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub generation: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub spot: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub actions: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub registry: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub tlm_elexon: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub tlm_bmr: Option<PathBuf>,
    /// Succeed even when rows were rejected.
    #[arg(long)]
    pub allow_rejects: bool,
    /// Store directory to create or overwrite.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for the corpus files and `manifest.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    /// Balancing volume as a share of generation, per fuel and year.
    Table1,
    /// Merit-order line fits below and above the knee.
    Table3,
    /// Annual cost under actual and counterfactual wind.
    Table4,
    /// Balancing cash flow per fuel, year and category.
    Cashflow,
    /// Mean spot price over the onshore and offshore share grid.
    Contour,
    /// Monthly scenario costs.
    Monthly,
    /// Savings net of ROC and curtailment costs.
    Net,
    /// Negative-bid deviation summaries per year.
    Bids,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    pub which: Which,
    /// Store written by `ingest` (or a synthetic corpus directory).
    #[arg(long, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Directory for the report CSVs.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Inclusive date range `YYYY-MM-DD..YYYY-MM-DD`.
    #[arg(long, value_name = "FROM..TO")]
    pub window: Option<Window>,
    /// Wind share (%) separating the two merit-order regimes.
    #[arg(long, value_name = "PCT", default_value_t = 30.0)]
    pub knee: f64,
    /// Upper end (%) of the below-knee regression window.
    #[arg(long, value_name = "PCT", default_value_t = 25.0)]
    pub below_cap: f64,
    /// Wind-share bin width (%) for counterfactual prices.
    #[arg(long, value_name = "PCT", default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// Fewest samples a bin needs before its mean replaces the actual price.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_MIN_N)]
    pub min_n: usize,
    /// Contour cell width (%).
    #[arg(long, value_name = "PCT", default_value_t = 1.0)]
    pub cell_width: f64,
    /// ROC ledger CSV (`period,technology,certificates_millions,cost_gbp_bn`).
    #[arg(long, value_name = "PATH")]
    pub roc_ledger: Option<PathBuf>,
    /// Wholesale savings, e.g. `4.30bn` or `840M`; overrides the store.
    #[arg(long, value_name = "GBP", allow_hyphen_values = true)]
    pub savings: Option<String>,
    /// ROC cost; required with `--savings`.
    #[arg(long, value_name = "GBP", allow_hyphen_values = true)]
    pub roc_cost: Option<String>,
    /// Curtailment cost paid to wind.
    #[arg(long, value_name = "GBP", allow_hyphen_values = true)]
    pub curtailment: Option<String>,
    /// Any further subsidy cost.
    #[arg(long, value_name = "GBP", allow_hyphen_values = true)]
    pub other: Option<String>,
}

fn run(cli: Cli) -> Result<(), Exit> {
    let rule = store::clock_rule(cli.clock_rule.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest_cmd::run(&args, &rule),
        Command::Synth(args) => synth_cmd::run(&args, &rule),
        Command::Report(args) => report::run(&args, &rule),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
