//! `wavepart`: detector scalars, figure datasets, samples, mutual information
//! and the lattice oracle from the command line.
//!
//! Exit codes: 0 on success, 1 on internal or numerical failure, 2 on invalid
//! input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "wavepart", version, about = "Wave and particle statistics of single-photon beams")]
struct Cli {
    /// Directory for output files; results are printed when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (each subcommand has its own default).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    W,
    Ww,
    Cc,
    Wc,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive sigma, s and P for each detector of a JSON experiment.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a plot-ready dataset.
    Figure {
        #[arg(value_enum)]
        which: Figure,
        /// Vacuum amplitude width (fig2, fig3).
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Overlap values; defaults to the published set for the figure.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        /// Grid points per axis.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Draw seeded samples of the single-photon statistics.
    Sample {
        #[arg(long, value_enum)]
        mode: SampleMode,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Overlap of the (first) wave detector.
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Overlap of the second wave detector (ww); defaults to `--s`.
        #[arg(long)]
        s2: Option<f64>,
        /// Click probability of the (first) counting detector.
        #[arg(long = "P", default_value_t = 0.4)]
        p: f64,
        /// Click probability of the second counting detector (cc); defaults to `--P`.
        #[arg(long = "P2")]
        p2: Option<f64>,
    },
    /// Mutual information of a wave-count or count-count experiment.
    Mi {
        #[arg(long, conflicts_with = "p2")]
        s: Option<f64>,
        #[arg(long = "P")]
        p: Option<f64>,
        #[arg(long = "P2")]
        p2: Option<f64>,
        /// Report the maximum of I(W;C) over the feasible region instead.
        #[arg(long, conflicts_with_all = ["s", "p", "p2"])]
        maximize: bool,
    },
    /// Run the lattice Fock-space oracle.
    Oracle {
        #[arg(long = "G", default_value_t = 4)]
        g: usize,
        #[arg(long, default_value_t = 3)]
        nmax: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Lib(wavepart::Error),
    Io(std::io::Error),
    Usage(String),
    /// A computation finished but its own checks failed.
    Failed(String),
}

impl From<wavepart::Error> for CliError {
    fn from(e: wavepart::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_invalid_input() => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
