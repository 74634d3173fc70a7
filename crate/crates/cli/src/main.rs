//! `lifeheal`: run lifecycle scenarios with or without the data-loss healer.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lifeheal_core::runner::run_files;
use lifeheal_core::{Error, HealerMemory, RunOptions, RunResult, Scenario};

const EXIT_UNHEALED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTEGRITY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lifeheal",
    version,
    about = "Lifecycle data-loss simulator and healer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's event script.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Healer memory file; created if missing, updated after the run.
        #[arg(long)]
        memory: Option<PathBuf>,
        /// Detection only: snapshot and diff every event, heal nothing.
        #[arg(long)]
        no_healer: bool,
        /// Annotate each event with oracle ground truth.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        report: PathBuf,
        /// Keep in-flight snapshot files in this directory.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Print the MS and MF entries of a memory file.
    InspectMemory {
        file: PathBuf,
        /// Print the canonical JSON form instead of one line per entry.
        #[arg(long)]
        json: bool,
    },
    /// Replace a memory file with an empty memory.
    ResetMemory { file: PathBuf },
    /// Detection-only run compared against the oracle on every event.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("lifeheal: {err}");
            ExitCode::from(match err {
                Error::Integrity(_) | Error::MemoryCorruption { .. } => EXIT_INTEGRITY,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            scenario,
            memory,
            no_healer,
            oracle_check,
            report,
            snapshot_dir,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let opts = RunOptions {
                healer: !no_healer,
                oracle_check,
                snapshot_dir,
            };
            let result = run_files(&scenario, &opts, memory.as_deref(), Some(&report))?;
            summarize(&result, &report);
            Ok(if result.exit_code() == 0 {
                0
            } else {
                EXIT_UNHEALED
            })
        }
        Command::InspectMemory { file, json } => {
            let memory = HealerMemory::load(&file)?;
            if json {
                print!("{}", String::from_utf8_lossy(&memory.to_bytes()));
            } else {
                print!("{}", memory.listing());
            }
            Ok(0)
        }
        Command::ResetMemory { file } => {
            HealerMemory::new().persist(&file)?;
            Ok(0)
        }
        Command::Oracle { scenario, report } => {
            let scenario = Scenario::load(&scenario)?;
            let opts = RunOptions {
                healer: false,
                oracle_check: true,
                snapshot_dir: None,
            };
            let result = run_files(&scenario, &opts, None, Some(&report))?;
            summarize(&result, &report);
            Ok(if result.report.detection_agrees() {
                0
            } else {
                EXIT_UNHEALED
            })
        }
    }
}

fn summarize(result: &RunResult, report_path: &Path) {
    let t = &result.report.totals;
    eprintln!(
        "{} events: {} full, {} selective, {} skipped; {} lost, {} healed{} -> {}",
        t.events,
        t.full_snapshots,
        t.selective_saves,
        t.skips,
        t.losses_detected,
        t.losses_healed,
        t.losses_missed
            .map(|m| format!(", {m} missed"))
            .unwrap_or_default(),
        report_path.display(),
    );
}
