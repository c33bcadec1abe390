//! `illiquid`: arbitrage, deflator, superhedging and profit-function checks
//! for market description files. Each run prints one JSON report per input
//! file to stdout; logs go to stderr.

#![allow(clippy::result_large_err)]

mod commands;
mod file;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand};
use thiserror::Error;

use illiquid::analysis::AnalysisError;
use illiquid::lp::Arithmetic;
use illiquid::market::ModelError;

use commands::{exit, CheckMode, Kind, Outcome, Task};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Analysis(e.into())
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Analysis(AnalysisError::Lp(_)) => exit::INTERNAL,
            _ => exit::INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "illiquid", version, about = "Arbitrage and deflator analysis for markets with convex trading costs")]
struct Cli {
    /// Pivoting arithmetic; verdicts are only exact in rational mode.
    #[arg(long, global = true, env = "ILLIQUID_ARITHMETIC", default_value = "rational")]
    arithmetic: Arithmetic,
    /// Accept bare JSON numbers (binary floats) in market files.
    #[arg(long, global = true)]
    float_input: bool,
    /// Recheck emitted certificates with the independent checkers.
    #[arg(long, global = true)]
    verify: bool,
    /// Worker threads for multiple input files.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether an arbitrage exists (exit 0 none, 10 found, 3 undecided).
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "plain")]
        mode: CheckMode,
    },
    /// Search for a price deflator (exit 0 found, 11 none at the epsilon schedule).
    Deflator {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "market")]
        kind: Kind,
        /// Lower bound for deflator values; repeat to give a schedule.
        #[arg(long = "epsilon")]
        epsilons: Vec<String>,
    },
    /// Decide whether a claim can be superhedged at zero cost (exit 0 yes, 12 no).
    Superhedge {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        claim: String,
        #[arg(long, default_value = "1")]
        alpha: String,
    },
    /// Profit function by primal and dual LP (exit 0 finite, 13 infinite).
    Sigma {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        deflator: String,
    },
    /// Recheck a stored report against its market file (exit 0 reproduced).
    Verify {
        file: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn run_file(cli: &Cli, task: &Task, path: &Path) -> Outcome {
    let name = path.display().to_string();
    let result = file::load(path, cli.float_input).and_then(|loaded| {
        log::info!("{name}: {} nodes, {} assets", loaded.instance.tree.len(), loaded.instance.dim());
        commands::run(task, &loaded, &name, cli.arithmetic, cli.verify)
    });
    match result {
        Ok(o) => o,
        Err(e) => {
            log::error!("{name}: {e}");
            let code = e.code();
            Outcome {
                code,
                report: commands::error_report(&name, Some(task), code, &e),
            }
        }
    }
}

/// Runs every file, fanning out over `jobs` threads; outcomes keep input order.
fn run_all(cli: &Cli, task: &Task, files: &[PathBuf]) -> Vec<Outcome> {
    let jobs = cli.jobs.clamp(1, files.len().max(1));
    if jobs == 1 {
        return files.iter().map(|f| run_file(cli, task, f)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Outcome>> = (0..files.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= files.len() {
                            break done;
                        }
                        done.push((i, run_file(cli, task, &files[i])));
                    }
                })
            })
            .collect();
        for w in workers {
            for (i, o) in w.join().expect("worker panicked") {
                slots[i] = Some(o);
            }
        }
    });
    slots.into_iter().map(|o| o.expect("every file ran")).collect()
}

fn verify_report(cli: &Cli, path: &Path, report_path: &Path) -> Outcome {
    let name = path.display().to_string();
    let result = (|| {
        let loaded = file::load(path, cli.float_input)?;
        let text = std::fs::read_to_string(report_path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", report_path.display())))?;
        let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", report_path.display())))?;
        commands::verify(&loaded, &report, cli.arithmetic)
    })();
    result.unwrap_or_else(|e| {
        log::error!("{name}: {e}");
        let code = e.code();
        Outcome {
            code,
            report: commands::error_report(&name, None, code, &e),
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (task, files) = match &cli.command {
        Command::Check { files, mode } => (Task::Check { mode: *mode }, files),
        Command::Deflator { files, kind, epsilons } => (
            Task::Deflator {
                kind: *kind,
                epsilons: epsilons.clone(),
            },
            files,
        ),
        Command::Superhedge { files, claim, alpha } => (
            Task::Superhedge {
                claim: claim.clone(),
                alpha: alpha.clone(),
            },
            files,
        ),
        Command::Sigma { files, deflator } => (
            Task::Sigma {
                deflator: deflator.clone(),
            },
            files,
        ),
        Command::Verify { file, report } => {
            let o = verify_report(&cli, file, report);
            println!("{}", serde_json::to_string_pretty(&o.report).expect("reports serialize"));
            return ExitCode::from(o.code as u8);
        }
    };
    let outcomes = run_all(&cli, &task, files);
    for o in &outcomes {
        println!("{}", serde_json::to_string_pretty(&o.report).expect("reports serialize"));
    }
    // With several files the most severe code wins; input errors rank first.
    let code = outcomes
        .iter()
        .map(|o| o.code)
        .max_by_key(|&c| (c == exit::INPUT, c))
        .unwrap_or(exit::OK);
    ExitCode::from(code as u8)
}
