use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

/// Equilibrium income distributions: curves, matching, fitting and simulation.
#[derive(Parser)]
#[command(name = "incomeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Mds,
    Survey,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exceedance curve of each income CSV, as `<stem>.ccdf.tsv`.
    Ccdf {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Keep every k-th point below the 100 richest.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Scale rich-list incomes onto a survey and write the merged sample.
    Match {
        /// Survey income CSV.
        #[arg(long)]
        input: PathBuf,
        /// Rich-list wealth CSV covering each year and the one before.
        #[arg(long)]
        wealth: PathBuf,
        #[arg(long, required = true)]
        year: Vec<i32>,
        /// Matching settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the distribution to income CSVs (one fit per year) or curve TSVs.
    Fit {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Restrict CSV input to these years; labels a TSV curve.
        #[arg(long)]
        year: Vec<i32>,
        /// Fit settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Exit 0 even when a search stops before converging.
        #[arg(long)]
        allow_nonconverged: bool,
        /// Keep every k-th overlay point below the 100 richest.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the Langevin ensemble and compare it with the closed form.
    Simulate {
        /// Simulation settings as JSON; defaults to the 2009 matched row.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw synthetic incomes from tabulated or supplied parameters.
    Sample {
        #[arg(long, value_enum, default_value_t = Table::Mds)]
        table: Table,
        #[arg(long)]
        year: Vec<i32>,
        /// Distribution parameters as JSON, instead of a table row.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Collect fit reports into one parameter table.
    Report {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("INCOMEFLOW_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Ccdf { input, decimate, common } => commands::ccdf(&input, decimate, &common),
        Cmd::Match { input, wealth, year, config, common } => {
            commands::matching(&input, &wealth, &year, config.as_deref(), &common)
        }
        Cmd::Fit { input, year, config, allow_nonconverged, decimate, common } => {
            commands::fit(&input, &year, config.as_deref(), allow_nonconverged, decimate, &common)
        }
        Cmd::Simulate { config, seed, common } => commands::simulate(config.as_deref(), seed, &common),
        Cmd::Sample { table, year, config, count, seed, common } => {
            commands::sample(table, &year, config.as_deref(), count, seed, &common)
        }
        Cmd::Report { input, common } => commands::report(&input, &common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
