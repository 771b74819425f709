mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "topolattice", version, about = "Topological waveguide superlattices: bands, invariants, biphoton propagation and disorder ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "topolattice-out")]
    pub out: PathBuf,
    /// Override the ensemble seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Only write outputs of this format (the manifest is always written).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// No summary on stdout and no warnings on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Bloch bands, gap report and finite-chain spectrum.
    Bands,
    /// Winding numbers, Zak phases, band windings and phase diagrams.
    Topology,
    /// Pump and biphoton trajectories.
    Propagate,
    /// Correlation maps, mode populations, Schmidt number, mismatch and parity reports.
    Analyze,
    /// Disorder ensemble statistics.
    Ensemble,
    /// Everything the configuration supports, with SVG figures.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Topology => "topology",
            Command::Propagate => "propagate",
            Command::Analyze => "analyze",
            Command::Ensemble => "ensemble",
            Command::Report => "report",
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("TOPOLATTICE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // only fails if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .find_map(|c| c.downcast_ref::<topolattice::Error>())
        .is_some_and(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match commands::run(cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
