//! `wsrot`: simulations, fixed points, averaged drift scans and splay checks
//! for rotator ensembles.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "wsrot", version, about)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: current directory for simulate and scan-fh).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for scans.
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,
    /// Seed for random initial states and property suites.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Run only invariants whose `module.name` contains NAME.
    #[arg(long, global = true, value_name = "NAME")]
    filter: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the phase model and write trajectory.csv and summary.json.
    Simulate,
    /// Solve for the fixed point of the truncated reduced flow.
    FixedPoint,
    /// Scan the averaged drift over cross-ratios (N = 4) and locate its roots.
    ScanFh,
    /// Compute a limit cycle and test the splay symmetry.
    SplayCheck,
    /// Run the randomized property suites.
    Invariants,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::config("--jobs must be at least 1".into(), None));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::config(e.to_string(), None))?;
    }
    let here = PathBuf::from(".");
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, out.unwrap_or(&here)),
        Command::FixedPoint => commands::fixed_point_report(&cfg, out),
        Command::ScanFh => commands::scan_fh(&cfg, out.unwrap_or(&here)),
        Command::SplayCheck => commands::splay(&cfg, out),
        Command::Invariants => commands::invariants(&cfg, cli.filter, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WSROT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(u8::try_from(f.exit_code).unwrap_or(1))
        }
    }
}
