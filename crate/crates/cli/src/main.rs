use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pesim_cli::commands::{self, Which};
use pesim_core::inequalities::Suite;

#[derive(Parser)]
#[command(name = "pe-sim", version, about = "Pursuit-evasion cross-diffusion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write timeseries, snapshots and a summary.
    Simulate { config: PathBuf },
    /// Run a named study and write verdicts.json.
    Experiment {
        config: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Run the inequality checkers and write one JSON report each.
    Verify {
        out_dir: PathBuf,
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Use a single exponent for the thin-film interpolation check.
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit plot.py for the outputs in a directory.
    Plot { out_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate { config } => commands::simulate_cmd(&config),
        Command::Experiment { config, which } => commands::experiment_cmd(&config, which),
        Command::Verify { out_dir, suite, beta, seed } => commands::verify_cmd(&out_dir, suite, beta, seed),
        Command::Plot { out_dir } => commands::plot_cmd(&out_dir).map(|p| println!("{}", p.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pe-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
