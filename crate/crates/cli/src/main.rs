use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fris_cli::commands::{self, execute, write_run};
use fris_cli::config::{load_scenario, Overrides};
use fris_cli::exit_code;
use fris_core::exec::Execution;
use fris_core::scenario::SnrGrid;

#[derive(Parser)]
#[command(name = "fris", version, about = "Exact statistics for correlated fluid and conventional RIS channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (TOML/JSON file or preset name) and write its artifacts.
    Run {
        config: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run several scenarios on a common SNR grid and write a combined CSV.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<String>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check the engine against a golden-vector CSV.
    GoldenCheck { vectors: PathBuf },
}

#[derive(Args)]
struct RunOpts {
    /// Monte Carlo trials; 0 gives analytic-only output.
    #[arg(long)]
    trials: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SNR grid as lo:hi:step in dB.
    #[arg(long, value_parser = parse_grid)]
    snr_db_range: Option<SnrGrid>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn parse_grid(s: &str) -> std::result::Result<SnrGrid, String> {
    s.parse().map_err(|e: fris_core::FrisError| e.to_string())
}

impl RunOpts {
    fn overrides(&self) -> Overrides {
        Overrides { trials: self.trials, seed: self.seed, snr_db: self.snr_db_range }
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, opts } => {
            let scenario = load_scenario(&config, &opts.overrides())?;
            let dir = opts
                .out
                .clone()
                .or_else(|| scenario.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
            let result = execute(&scenario, opts.exec())?;
            let files = write_run(&result, &dir)?;
            say!("{}", commands::summary(&result));
            say!("  wrote {} files to {}", files.len(), dir.display());
        }
        Command::Compare { configs, opts } => {
            let ov = opts.overrides();
            let scenarios = configs.iter().map(|c| load_scenario(c, &ov)).collect::<Result<Vec<_>, _>>()?;
            if scenarios.len() < 2 {
                return Err(fris_core::FrisError::Config("compare needs at least 2 scenarios".into()).into());
            }
            let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out").join("compare"));
            let mut results = Vec::with_capacity(scenarios.len());
            for s in &scenarios {
                let r = execute(s, opts.exec())?;
                say!("{}", commands::summary(&r));
                results.push(r);
            }
            let path = dir.join("compare.csv");
            commands::compare(&results, &path)?;
            say!("  wrote {}", path.display());
        }
        Command::GoldenCheck { vectors } => {
            let report = commands::golden_check(&vectors)?;
            say!("{}", commands::golden_summary(&report));
            commands::require_golden(&report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
