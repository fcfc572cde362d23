use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exactdiff_cli::validate::{self, SuiteStatus};
use exactdiff_cli::{bench, simulate, CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "exactdiff", version, about = "Exact simulation of one-dimensional diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cost statistics per sweep cell, written to bench.csv and bench.json.
    Bench(Common),
    /// Skeletons and filled-in paths, written to skeletons.json and paths.csv.
    Simulate(Common),
    /// Oracle suites, written to validate.json; exits 2 if any fails.
    Validate(Common),
}

fn setup(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    std::fs::create_dir_all(&c.out).map_err(|source| CliError::Io { path: c.out.clone(), source })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(c) => {
            let cfg = setup(&c)?;
            let rows = bench::run_bench(&cfg)?;
            bench::write_outputs(&rows, &c.out)?;
            print!("{}", bench::to_csv(&rows));
        }
        Command::Simulate(c) => {
            let cfg = setup(&c)?;
            let s = simulate::run_simulate(&cfg)?;
            simulate::write_outputs(&s, &c.out)?;
            println!("{} paths written to {}", s.skeletons.len(), c.out.display());
        }
        Command::Validate(c) => {
            let cfg = setup(&c)?;
            let reports = validate::run_validate(&cfg)?;
            validate::write_report(&reports, &c.out)?;
            let mut failed = Vec::new();
            for r in &reports {
                let tag = match r.status {
                    SuiteStatus::Pass => "pass",
                    SuiteStatus::Fail => "FAIL",
                    SuiteStatus::Underpowered => "underpowered",
                };
                println!("{:<16} {tag:<12} n={} {}", r.suite, r.n, r.summary());
                match r.status {
                    SuiteStatus::Fail => failed.push(r.suite.clone()),
                    SuiteStatus::Underpowered => {
                        log::warn!("{}: only {} draws, below the {} needed for a verdict", r.suite, r.n, validate::MIN_POWERED)
                    }
                    SuiteStatus::Pass => {}
                }
            }
            if !failed.is_empty() {
                return Err(CliError::Validation(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
