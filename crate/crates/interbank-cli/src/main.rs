//! `interbank-eq`: solve, simulate and export interbank network equilibria.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "interbank-eq", version, about = "Interbank network equilibria under liquidity shocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Dec,
    Cent,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Fractional loss on every shock.
    Loss,
    /// Partially liquid long bond.
    Bond,
    /// Self-investment scaled with cash.
    Eta,
}

#[derive(clap::Args)]
pub struct Io {
    /// System config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct Sweep {
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    /// Number of sizes between the ends; every size when omitted.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibria and write a JSON report.
    Solve {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
    },
    /// Export the exposure network as a DOT digraph.
    Network {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "dec")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
    },
    /// Welfare ratio against system size for a single-bank template.
    SweepWr {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Monte Carlo paths (CSV to --out) and a JSON summary on stdout.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "dec")]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the summary; stdout when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Self-investment levels that make selfish banks hold the planner's cash.
    Replicate {
        #[command(flatten)]
        io: Io,
        /// Planner's self-investment per bank (comma separated, or one value for all);
        /// defaults to the configured values.
        #[arg(long, value_delimiter = ',')]
        eta_c: Vec<f64>,
    },
    /// Solve one of the model variants.
    Extensions {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum)]
        variant: Variant,
        /// Illiquid share of the long bond.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Planner cash bounds and rate table for the first bank.
    Bounds {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 100)]
        n_min: usize,
        #[arg(long, default_value_t = 100_000)]
        n_max: usize,
        /// Log-spaced sizes between the ends.
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { io, mode } => commands::solve(&io, mode),
        Command::Network { io, mode, format } => commands::network(&io, mode, format),
        Command::SweepWr { io, sweep } => commands::sweep_wr(&io, &sweep),
        Command::Simulate {
            io,
            mode,
            paths,
            seed,
            summary,
        } => commands::simulate(&io, mode, paths, seed, summary.as_deref()),
        Command::Replicate { io, eta_c } => commands::replicate(&io, &eta_c),
        Command::Extensions { io, variant, alpha } => commands::extensions(&io, variant, alpha),
        Command::Bounds {
            io,
            n_min,
            n_max,
            steps,
            format,
        } => commands::bounds(&io, n_min, n_max, steps, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
