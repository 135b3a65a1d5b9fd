use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mnar_pcor::Mechanism;

pub const THREADS_ENV: &str = "MNAR_PCOR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "mnar-pcor", version)]
#[command(about = "Partial correlation under missing-not-at-random data: sensitivity intervals and coverage studies")]
#[command(after_help = "The worker thread count can be set with MNAR_PCOR_THREADS.\n\
Exit codes: 2 unreadable input, 3 invalid flags or columns, 4 mask does not match mechanism, 5 estimation failed.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate ρ over a box of sensitivity parameters for a CSV file.
    Analyze(AnalyzeArgs),
    /// Run a seeded coverage experiment on simulated data.
    Simulate(SimulateArgs),
    /// Write one simulated dataset as CSV (missing cells as NA).
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|e: mnar_pcor::Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub partner: String,
    /// Comma-separated adjuster columns.
    #[arg(long, value_delimiter = ',')]
    pub adjust: Vec<String>,
    #[arg(long, value_parser = parse_mechanism)]
    pub mechanism: Mechanism,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_max: f64,
    /// γ₂ range, mechanism C only.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2_max: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Grid points per γ dimension.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 250)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = parse_mechanism, default_value = "A")]
    pub mechanism: Mechanism,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub gamma0: f64,
    /// Partner selection correlation, mechanism C only.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma20: f64,
    /// γ range of the uncertainty region, as `lo,hi`.
    #[arg(long, default_value = "0,0.5", allow_hyphen_values = true)]
    pub ur: String,
    /// γ₂ range of the uncertainty region (mechanism C; defaults to --ur).
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2_max: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Format for stdout when --out is omitted.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Directory for coverage.json and replicates.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 250)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = parse_mechanism, default_value = "A")]
    pub mechanism: Mechanism,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma20: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
