//! Command-line surface for the template matching test toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! convergence error.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ntmt",
    version,
    about = "Non-overlapping template matching randomness tests, joint p-value \
             distributions and battery whitening"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a deterministic bit sequence to a file or stdout
    Gen(GenArgs),
    /// Enumerate templates, compute correlations, dump the matrix
    Templates {
        #[command(subcommand)]
        cmd: TemplatesCmd,
    },
    /// Run the matching test
    Test {
        #[command(subcommand)]
        cmd: TestCmd,
    },
    /// Apply a template battery to input data
    Battery {
        #[command(subcommand)]
        cmd: BatteryCmd,
    },
    /// Build or inspect whitening transforms
    Whitening {
        #[command(subcommand)]
        cmd: WhiteningCmd,
    },
    /// Evaluate the bivariate distribution of two correlated test items
    Jointdist {
        #[command(subcommand)]
        cmd: JointdistCmd,
    },
    /// Reproducible experiments over generated corpora
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Mt19937,
    Aes128Ctr,
}

impl From<GeneratorArg> for ntmt::GeneratorKind {
    fn from(value: GeneratorArg) -> Self {
        match value {
            GeneratorArg::Mt19937 => ntmt::GeneratorKind::Mt19937,
            GeneratorArg::Aes128Ctr => ntmt::GeneratorKind::Aes128Ctr,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    /// '0'/'1' characters
    Ascii,
    /// Raw binary
    Raw,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BitOrderArg {
    Msb,
    Lsb,
}

impl From<BitOrderArg> for ntmt::BitOrder {
    fn from(value: BitOrderArg) -> Self {
        match value {
            BitOrderArg::Msb => ntmt::BitOrder::MsbFirst,
            BitOrderArg::Lsb => ntmt::BitOrder::LsbFirst,
        }
    }
}

#[derive(Args)]
pub struct GenArgs {
    /// Generator family
    #[arg(long, value_enum, default_value = "mt19937")]
    pub generator: GeneratorArg,
    /// Base seed; combined with --index to derive the stream
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Sequence index within the base seed's family
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Number of bits to emit
    #[arg(long)]
    pub bits: usize,
    /// Output file format
    #[arg(long, value_enum, default_value = "ascii")]
    pub format: FileFormat,
    /// Bit order for raw output
    #[arg(long, value_enum, default_value = "msb")]
    pub bit_order: BitOrderArg,
    /// Output path; stdout when omitted
    #[arg(short, long)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
pub enum TemplatesCmd {
    /// List all aperiodic templates of a given length
    Enumerate {
        #[arg(short = 'm', long, default_value_t = 9)]
        length: u32,
        /// text, json or csv
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Correlation coefficient of two templates
    Rho { t1: String, t2: String },
    /// Full correlation matrix of a battery
    Matrix {
        #[arg(short = 'm', long, default_value_t = 9)]
        length: u32,
        /// "all" aperiodic templates or the "default" battery (m = 9 only)
        #[arg(long, default_value = "all")]
        battery: String,
        /// csv or json
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

#[derive(Args)]
pub struct InputArgs {
    /// Input bit file
    #[arg(long)]
    pub input: std::path::PathBuf,
    /// Input file format
    #[arg(long, value_enum, default_value = "ascii")]
    pub format: FileFormat,
    /// Bit order for raw input
    #[arg(long, value_enum, default_value = "msb")]
    pub bit_order: BitOrderArg,
}

#[derive(Subcommand)]
pub enum TestCmd {
    /// Run the test for one template on one input sequence
    Run {
        #[command(flatten)]
        input: InputArgs,
        /// Template pattern, leftmost bit first
        #[arg(long)]
        template: String,
        /// Number of blocks (degrees of freedom)
        #[arg(long, default_value_t = 8)]
        blocks: usize,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum BatteryCmd {
    /// Run the default 145-template battery, plain or whitened
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 8)]
        blocks: usize,
        /// Rejection threshold
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Whiten the battery before testing
        #[arg(long)]
        orthogonalize: bool,
        /// Load a pinned transform instead of rebuilding it
        #[arg(long)]
        transform: Option<std::path::PathBuf>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum WhiteningCmd {
    /// Build the default battery's transform and write it as JSON
    Build {
        /// Zero-eigenvalue tolerance relative to the largest eigenvalue
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Summarize a stored transform
    Inspect { path: std::path::PathBuf },
}

#[derive(Subcommand)]
pub enum JointdistCmd {
    /// Evaluate the joint CDF at one point
    Eval {
        #[arg(long, default_value_t = 8)]
        dof: u32,
        #[arg(long)]
        rho: f64,
        #[arg(short = 'x', long)]
        x: f64,
        #[arg(short = 'y', long)]
        y: f64,
    },
    /// Emit a CSV of p-value cell probabilities
    Grid {
        #[arg(long, default_value_t = 8)]
        dof: u32,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

#[derive(Args, Clone)]
pub struct ExperimentOverrides {
    /// TOML config file; flags take precedence over it
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub generator: Option<GeneratorArg>,
    /// Number of sequences (K)
    #[arg(short = 'K', long)]
    pub sequences: Option<usize>,
    /// Bits per sequence (n)
    #[arg(short = 'n', long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Subcommand)]
pub enum ExperimentCmd {
    /// Joint p-value histogram of a template pair against theory
    Fig1 {
        /// Template pair as "T1,T2"
        #[arg(long, default_value = "001010101,010101011")]
        pair: String,
        #[command(flatten)]
        overrides: ExperimentOverrides,
        /// Also write the per-cell histogram as CSV
        #[arg(long)]
        csv: Option<std::path::PathBuf>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Rejection-count histogram of the default battery
    Fig3 {
        /// Skip the whitening transform (pre-transform battery)
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        overrides: ExperimentOverrides,
        /// Also write the histogram as CSV
        #[arg(long)]
        csv: Option<std::path::PathBuf>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

/// Error categories mapped to process exit codes.
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
