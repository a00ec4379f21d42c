use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Core(#[from] dslab::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Failed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Core(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::Failed(_) => "check-failed",
        }
    }

    /// 2 for anything the caller can fix by changing inputs, 1 otherwise.
    fn exit_code(&self) -> u8 {
        use dslab::Error as E;
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Core(E::InvalidGrid(_) | E::InvalidParams(_) | E::InvalidArgument(_) | E::NearSingular { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dslab", version, about = "Line-soliton stability toolkit")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, env = "DSLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    error_json: bool,
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OperatorArg {
    /// `1 − ∂ₓ² − c sech²`
    Schrodinger,
    A1,
    A2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubspaceArg {
    Full,
    Even,
    Odd,
    Tagged,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Localized eigenvalues of a linear operator.
    Spectrum {
        #[arg(long, value_enum, default_value = "schrodinger")]
        operator: OperatorArg,
        /// Potential strength for the Schrödinger operator.
        #[arg(long, default_value_t = 6.0)]
        c: f64,
        #[arg(long, value_enum, default_value = "full")]
        subspace: SubspaceArg,
    },
    /// Bifurcation frequency and its eigenfield.
    Omega0,
    /// Quadratic-form identity on random fields and the trial-family limit.
    Identity {
        #[arg(long, default_value_t = 100)]
        fields: usize,
        /// Cutoff radii (need 4R ≤ half_length).
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 5.0])]
        radii: Vec<f64>,
    },
    /// Resolvent operator norms along the imaginary axis.
    ResolventScan {
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 30.0, 100.0, 300.0, 1000.0])]
        k: Vec<f64>,
    },
    /// Continue the periodic-soliton branch from the line soliton.
    Continue {
        #[arg(long, default_value_t = 0.05)]
        s_max: f64,
        #[arg(long, default_value_t = 5e-3)]
        ds: f64,
    },
    /// Transverse growth rate λ(κ).
    Growth {
        /// Single wavenumber; must lie in (0, ω0).
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
        /// Wavenumbers as fractions of ω0 (ignored with --kappa).
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999])]
        fractions: Vec<f64>,
    },
    /// Time-domain run of a seeded line soliton and its growth rate.
    Evolve {
        /// Transverse wavenumber as a fraction of ω0.
        #[arg(long, default_value_t = 0.5)]
        kappa_frac: f64,
        #[arg(long, default_value_t = 1e-4)]
        amp: f64,
        #[arg(long, default_value_t = dslab::evolve::DEFAULT_T)]
        t: f64,
        #[arg(long, default_value_t = dslab::evolve::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 256)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
    },
    /// Run the full check suite and print a pass/fail table.
    Verify {
        /// Run only these checks.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Spectrum { operator, c, subspace } => commands::spectrum(&cfg, operator, c, subspace),
        Command::Omega0 => commands::omega0(&cfg),
        Command::Identity { fields, radii } => commands::identity(&cfg, fields, &radii),
        Command::ResolventScan { k } => commands::resolvent_scan(&cfg, &k),
        Command::Continue { s_max, ds } => commands::continue_branch(&cfg, s_max, ds),
        Command::Growth { kappa, fractions } => commands::growth(&cfg, kappa, &fractions),
        Command::Evolve {
            kappa_frac,
            amp,
            t,
            dt,
            nx,
            ny,
        } => commands::evolve(&cfg, kappa_frac, amp, t, dt, nx, ny),
        Command::Verify { only } => commands::verify(&cfg, &only),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.error_json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                let doc = serde_json::json!({
                    "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }
                });
                eprintln!("{doc}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
