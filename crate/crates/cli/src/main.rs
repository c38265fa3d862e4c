use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "algebroid", version, about = "Run algebroid computations described by a config file")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task and write one JSON report per task.
    Run {
        config: PathBuf,
        /// Override a config value: `run.<key>=v` or `<type>.<name>.<key>=v`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Validate a config and print its entities and task plan.
    Describe {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config, set, out } => match algebroid_cli::run(&config, &set, &out) {
            Ok(summaries) => {
                for s in &summaries {
                    println!(
                        "{} {} ({}) {:.2}s -> {}",
                        if s.passed { "PASS" } else { "FAIL" },
                        s.name,
                        s.kind,
                        s.wall_time_s,
                        s.report.display()
                    );
                }
                if summaries.iter().all(|s| s.passed) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Describe { config, set } => match algebroid_cli::describe(&config, &set) {
            Ok(table) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
