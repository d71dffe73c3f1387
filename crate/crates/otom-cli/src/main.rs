//! `otom` — command-line driver for the OTOM simulation library.
//!
//! Exit codes are stable for scripting: 0 success, 1 runtime numerical
//! failure, 2 usage/validation error (clap parse errors also exit 2).

mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Failures split by exit code: bad flags vs. failed computation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<otom_core::Error> for CliError {
    fn from(e: otom_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o failure: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(
    name = "otom",
    version,
    about = "out-of-time-order matrix simulations: Haar scaling, kicked-rotor delta decay, standard-map portraits, Choi dumps"
)]
struct Cli {
    /// RNG seed (falls back to OTOM_SEED, then 42)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (falls back to OTOM_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory output files are written into
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Format for tabular outputs (matrices are always JSON)
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Emit one progress line per work item on stderr
    #[arg(long, global = true)]
    progress: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Haar-random scaling of OTOM correlation measures over system size
    Haar(HaarArgs),
    /// Δ(t) decay for the spin-coupled quantum kicked rotor
    Qkr(QkrArgs),
    /// Classical standard-map phase portraits
    Chirikov(ChirikovArgs),
    /// Dump an OTOM Choi matrix (or a conditional one) as JSON
    Choi(ChoiArgs),
    /// Run the deterministic self-check suite
    Selftest,
}

#[derive(Args)]
pub struct HaarArgs {
    /// Comma-separated system dimensions N, strictly ascending
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256")]
    pub dims: Vec<usize>,

    /// Haar draws per dimension
    #[arg(long, default_value_t = 50)]
    pub samples: usize,

    /// Start the system maximally mixed instead of in |0>
    #[arg(long)]
    pub mixed: bool,
}

#[derive(Args)]
pub struct QkrArgs {
    /// Comma-separated kick strengths
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,5")]
    pub k: Vec<f64>,

    /// Number of kicks T (delta is computed for every t = 1..=T)
    #[arg(long, default_value_t = 100)]
    pub kicks: usize,

    /// Rotor dimension 2N (even; power of two when a sysbit target is used)
    #[arg(long, default_value_t = 256)]
    pub dim: usize,

    /// Effective Planck constant
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,

    /// Spin-coupling strengths v1,v2,v3
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    pub v: Vec<f64>,

    /// Moving-average window for the smoothed series (odd)
    #[arg(long, default_value_t = 5)]
    pub window: usize,

    /// Butterfly targets: probe and/or sysbit<b>
    #[arg(long, value_delimiter = ',', default_value = "probe,sysbit0")]
    pub targets: Vec<String>,
}

#[derive(Args)]
pub struct ChirikovArgs {
    /// Comma-separated kick strengths
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,5")]
    pub k: Vec<f64>,

    /// Seed lattice of initial conditions, e.g. 16x16
    #[arg(long, default_value = "16x16")]
    pub grid: String,

    /// Map iterations per orbit
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProcessKind {
    /// Trivial dynamics (two independent Bell pairs)
    Identity,
    /// One Haar-random joint unitary drawn from the seed
    Haar,
    /// The spin-coupled kicked rotor
    Qkr,
}

#[derive(Args)]
pub struct ChoiArgs {
    /// Validate a previously emitted matrix file instead of generating one
    #[arg(long, value_name = "FILE")]
    pub validate: Option<PathBuf>,

    /// Process family to build
    #[arg(long, value_enum, default_value_t = ProcessKind::Identity)]
    pub process: ProcessKind,

    /// System dimension (identity/haar processes)
    #[arg(long, default_value_t = 2)]
    pub system_dim: usize,

    /// Rotor dimension 2N (qkr process)
    #[arg(long, default_value_t = 16)]
    pub dim: usize,

    /// Kick strength (qkr process)
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,

    /// Effective Planck constant (qkr process)
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,

    /// Spin-coupling strengths v1,v2,v3 (qkr process)
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    pub v: Vec<f64>,

    /// Kick count (qkr process)
    #[arg(long, default_value_t = 5)]
    pub kicks: usize,

    /// Butterfly target: probe or sysbit<b>
    #[arg(long, default_value = "probe")]
    pub target: String,

    /// Butterfly angle; when present the 4x4 conditional Choi is emitted
    #[arg(long)]
    pub phi: Option<f64>,

    /// Output file name inside --out-dir
    #[arg(long)]
    pub out: Option<String>,
}

/// Shared run context distilled from global flags and environment.
pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    pub progress: bool,
}

fn env_parsed<T: std::str::FromStr>(name: &str) -> CliResult<Option<T>> {
    match std::env::var(name) {
        Ok(raw) => raw.trim().parse::<T>().map(Some).map_err(|_| {
            CliError::Usage(format!("{name} must be a valid number, got {raw:?}"))
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = match cli.seed {
        Some(s) => s,
        None => env_parsed::<u64>("OTOM_SEED")?.unwrap_or(42),
    };
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => env_parsed::<usize>("OTOM_THREADS")?,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be ≥ 1".into()));
        }
        // a second build_global (e.g. under a test harness) is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let ctx = Ctx {
        seed,
        out_dir: cli.out_dir,
        format: cli.format,
        progress: cli.progress,
    };
    match cli.command {
        Cmd::Haar(args) => commands::cmd_haar(&ctx, &args),
        Cmd::Qkr(args) => commands::cmd_qkr(&ctx, &args),
        Cmd::Chirikov(args) => commands::cmd_chirikov(&ctx, &args),
        Cmd::Choi(args) => commands::cmd_choi(&ctx, &args),
        Cmd::Selftest => commands::cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
