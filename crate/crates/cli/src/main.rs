use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phr_cli::{run_file, RunOptions};

#[derive(Parser)]
#[command(name = "phr", version, about = "Posterior hallucination rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        seed,
        out,
        workers,
    } = cli.command;
    let opts = RunOptions {
        seed,
        out_dir: out,
        workers,
    };
    match run_file(&config, &opts) {
        Ok(outcome) if outcome.failures == 0 => {
            println!("{}", outcome.out_dir.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            eprintln!(
                "{} of {} rows failed; partial results in {}",
                outcome.failures,
                outcome.rows.len(),
                outcome.out_dir.display()
            );
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("phr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
