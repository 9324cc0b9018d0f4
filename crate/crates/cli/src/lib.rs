//! Command-line front end for the spectrum-games engine.
//!
//! Every subcommand reads a JSON scenario document (`--config`), runs one
//! analysis and writes its tables as CSV or JSON. Exit status is 0 on
//! success, 1 for invalid input and 2 when a computation fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use spectrum_games::experiments::KnowledgeProfile;

pub mod commands;
pub mod document;
pub mod report;

use document::{Format, ScenarioDocument};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Engine(#[from] spectrum_games::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use spectrum_games::Error as E;
        match self {
            CliError::Engine(
                E::Degenerate(_) | E::NoPureNashReached { .. } | E::EnsembleUnstable { .. } | E::LinearProgram(_),
            ) => 2,
            _ => 1,
        }
    }
}

/// Comma-separated list of numbers, e.g. `1,0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberList(pub Vec<f64>);

impl FromStr for NumberList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()
            .map(NumberList)
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectrum-games", version, about = "Game-theoretic power control and learning experiments")]
pub struct Cli {
    /// Scenario document (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the document's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output tables; without it everything goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GameView {
    /// The document's finite game.
    Finite,
    /// The continuous power game.
    Power,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Water-filling of one user against the noise floor alone.
    Waterfill {
        /// User number, starting at 1.
        #[arg(long, default_value_t = 1)]
        user: usize,
    },
    /// Iterative water-filling to a Nash equilibrium.
    Iw,
    /// Leader PSD search against a water-filling follower.
    Stackelberg {
        #[arg(long, default_value_t = 1)]
        leader: usize,
    },
    /// Weighted rate-sum optima on the allocation grid.
    Pareto {
        /// Weight vector, repeatable.
        #[arg(long = "weights")]
        weights: Vec<NumberList>,
    },
    /// IW, Stackelberg and Pareto samples in one table.
    Region,
    /// Finite-game analysis.
    Matrix {
        #[command(subcommand)]
        action: MatrixCommand,
    },
    /// Correlated equilibria of the finite game.
    Ce {
        #[command(subcommand)]
        action: CeCommand,
    },
    /// Repeated play by adaptive learners.
    Learn {
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Value of knowledge for one or more knowledge profiles.
    Vok {
        /// Comma-separated levels (priv, heter, comp), repeatable.
        #[arg(long = "profile")]
        profiles: Vec<KnowledgeProfile>,
        /// Which game to evaluate when the document holds both.
        #[arg(long, value_enum)]
        game: Option<GameView>,
    },
    /// Random-channel ensemble of Stackelberg versus IW rate ratios.
    Ensemble {
        #[arg(long)]
        realizations: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MatrixCommand {
    /// Pure and mixed Nash equilibria, dominance and Stackelberg outcomes.
    Solve,
}

#[derive(Debug, Subcommand)]
pub enum CeCommand {
    /// Checks the obedience constraints for a joint distribution.
    Check {
        /// Probabilities in profile order; defaults to `ce.distribution`.
        #[arg(long)]
        dist: Option<NumberList>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Maximizes weighted expected utility over correlated equilibria.
    Optimize {
        #[arg(long)]
        weights: Option<NumberList>,
    },
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let doc = ScenarioDocument::load(path)?;
    let output = doc.output.clone().unwrap_or_default();
    let resolved = doc.resolve(cli.seed)?;
    let report = commands::dispatch(&cli.command, &resolved)?;
    let format = cli.format.or(output.format).unwrap_or(Format::Csv);
    let dir = cli.out.clone().or(output.dir.map(PathBuf::from));
    report.emit(dir.as_deref(), format, out)
}
