use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qlbm::cli::{self, CliError, CliResult, CompareConfig, RunConfig};
use qlbm::lattice::Scheme;

#[derive(Parser)]
#[command(name = "qlbm", version, about = "Ancilla-free quantum lattice Boltzmann experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write field.csv / report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two configurations, optionally over a seed sweep.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Toffoli counts of the streaming circuits.
    Gatecount {
        #[arg(long, default_value = "D2Q5")]
        scheme: String,
        /// Comma-separated lattice sizes per axis.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 4, 8, 16, 32, 64])]
        m: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Per-loop post-selection probability trace.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cli::cmd_run(&cfg, out.as_deref())
        }
        Command::Compare { config, out, seed } => {
            let mut cfg = CompareConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.a.seed = seed;
            }
            cli::cmd_compare(&cfg, out.as_deref())
        }
        Command::Gatecount { scheme, m, out } => {
            let scheme: Scheme = scheme.parse().map_err(CliError::Model)?;
            cli::cmd_gatecount(scheme, &m, &out)
        }
        Command::Probe { config, out } => cli::cmd_probe(&RunConfig::load(&config)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
