mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfshift::trainer::DEFAULT_EMBED_BANK_SCALE;

#[derive(Parser, Debug)]
#[command(
    name = "cfshift",
    version,
    about = "Measure and reduce domain shift with characteristic functions"
)]
struct Cli {
    /// Seed for every random choice not covered by a more specific flag.
    #[arg(long, global = true, env = "CFSHIFT_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic multi-domain dataset as CSV.
    GenData(GenDataArgs),
    /// Pairwise CFL distances between the domains of a CSV file.
    Distance(DistanceArgs),
    /// Train an adapter with cross-entropy plus CFL alignment.
    Train(TrainArgs),
    /// Render a cf-plane sweep or PCA scatter as SVG plus companion CSV.
    Plot(PlotArgs),
    /// Per-domain accuracy of a trained checkpoint.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 3)]
    pub domains: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Samples per class and domain.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Rotation added per domain index, in degrees.
    #[arg(long, default_value_t = cfshift::data::BENCHMARK_ROTATION_STEP)]
    pub rotation_step: f64,
    /// Translation added per domain index.
    #[arg(long, default_value_t = cfshift::data::BENCHMARK_SHIFT_STEP)]
    pub shift_step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Gaussian,
    RadialSweep,
}

#[derive(Args, Debug, Clone)]
pub struct BankArgs {
    /// Number of frequencies.
    #[arg(long = "bank-k", default_value_t = 64)]
    pub k: usize,
    /// Gaussian standard deviation, or maximum radius of a sweep.
    #[arg(long = "bank-scale")]
    pub scale: Option<f64>,
    /// Defaults to --seed.
    #[arg(long = "bank-seed", id = "bank_seed")]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Gaussian)]
    pub scheme: SchemeArg,
    /// Direction count for the radial-sweep scheme.
    #[arg(long, default_value_t = 1)]
    pub directions: usize,
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Domains whose pooled statistics standardise the features (all when omitted).
    #[arg(long, value_delimiter = ',')]
    pub source: Vec<String>,
    #[command(flatten)]
    pub bank: BankArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub source: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Rows drawn from each domain per step.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    /// Draw a fresh frequency bank at every step.
    #[arg(long)]
    pub resample_bank: bool,
    #[command(flatten)]
    pub bank: BankArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines history (defaults to the checkpoint path with a .jsonl extension).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    CfPlane,
    PcaScatter,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long, value_enum, default_value_t = PlotKind::CfPlane)]
    pub kind: PlotKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Plot model embeddings instead of standardised raw features.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub directions: usize,
    #[arg(long, default_value_t = 40)]
    pub steps: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sweep_scale: f64,
    /// SVG path.
    #[arg(long)]
    pub out: PathBuf,
    /// Companion CSV (defaults to the SVG path with a .csv extension).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Domains to score (all when omitted).
    #[arg(long, value_delimiter = ',')]
    pub domains: Vec<String>,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BankArgs {
    pub fn params(&self, global_seed: u64, default_scale: f64) -> cfshift::BankParams {
        let scheme = match self.scheme {
            SchemeArg::Gaussian => cfshift::Scheme::Gaussian,
            SchemeArg::RadialSweep => cfshift::Scheme::RadialSweep {
                directions: self.directions,
            },
        };
        cfshift::BankParams {
            seed: self.seed.unwrap_or(global_seed),
            scale: self.scale.unwrap_or(default_scale),
            scheme,
            k: self.k,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, cli.seed),
        Command::Distance(a) => commands::distance(a, cli.seed),
        Command::Train(a) => commands::train(a, cli.seed, DEFAULT_EMBED_BANK_SCALE),
        Command::Plot(a) => commands::plot(a, cli.seed),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
