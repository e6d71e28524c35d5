//! Command-line driver: `slicer verify FILE` runs the full pipeline and
//! prints a machine-readable report.
//!
//! Exit codes: 0 verdict safe, 1 verdict unknown, 2 usage or parse
//! error, 3 solver or infrastructure error.

use clap::{Parser, Subcommand};
use slicer_core::report::{verify_source, PipelineError, RunConfig, WeakeningMode};
use slicer_core::smt::default_solver_command;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slicer", about = "Inductive invariant inference by formula slicing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the control-flow automaton as a text digraph.
    DumpCfa {
        /// Input program file.
        file: PathBuf,
        /// Apply error-directed reduction and large-block compaction.
        #[arg(long)]
        compact: bool,
    },
    /// Verify a program: prove its asserts safe or report unknown.
    Verify {
        /// Input program file.
        file: PathBuf,
        /// Solver command line (defaults to $SLICER_SOLVER, then a
        /// bundled lia-smt next to this binary).
        #[arg(long, value_name = "CMD")]
        solver_cmd: Option<String>,
        /// Weakening strategy.
        #[arg(long, value_name = "MODE", default_value = "cex")]
        weakening: String,
        /// Explicit-expansion bound for the lemma-set conversion.
        #[arg(long, default_value_t = 16)]
        expansion_limit: usize,
        /// Per-query solver timeout in milliseconds.
        #[arg(long, default_value_t = 60_000)]
        query_timeout: u64,
        /// Abstract-reachability-tree node budget.
        #[arg(long, default_value_t = 10_000)]
        budget_nodes: usize,
        /// Total wall-clock budget in milliseconds.
        #[arg(long, default_value_t = 300_000)]
        budget_wall: u64,
        /// Print the per-location invariants in the report.
        #[arg(long)]
        dump_invariants: bool,
        /// Also write the report to this file.
        #[arg(long, value_name = "PATH")]
        stats_out: Option<PathBuf>,
        /// Log every solver session's exact bytes under this directory.
        #[arg(long, value_name = "DIR")]
        smtlib_log: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::DumpCfa { file, compact } => {
            let source = match std::fs::read_to_string(&file) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            let program = match slicer_core::parse_program(&source) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("parse error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut cfa = slicer_core::lower_to_cfa(&program);
            if compact {
                if cfa.error_node.is_some() {
                    cfa = slicer_core::cfa_passes::reduce_to_error(&cfa);
                }
                let protected = slicer_core::cfa_passes::default_protected(&cfa);
                cfa = slicer_core::cfa_passes::compact(&cfa, &protected, 16);
            }
            print!("{}", cfa.dump());
            ExitCode::SUCCESS
        }
        Command::Verify {
            file,
            solver_cmd,
            weakening,
            expansion_limit,
            query_timeout,
            budget_nodes,
            budget_wall,
            dump_invariants,
            stats_out,
            smtlib_log,
        } => {
            let mode = match weakening.as_str() {
                "cex" => WeakeningMode::Cex,
                "syntactic" => WeakeningMode::Syntactic,
                other => {
                    eprintln!("error: unknown weakening mode `{other}` (use cex or syntactic)");
                    return ExitCode::from(2);
                }
            };
            let solver_command = match solver_cmd {
                Some(cmd) => cmd.split_whitespace().map(str::to_string).collect(),
                None => match default_solver_command() {
                    Some(cmd) => cmd,
                    None => {
                        eprintln!(
                            "error: no solver configured; pass --solver-cmd or set SLICER_SOLVER"
                        );
                        return ExitCode::from(3);
                    }
                },
            };
            let source = match std::fs::read_to_string(&file) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            let config = RunConfig {
                solver_command,
                mode,
                expansion_limit,
                query_timeout_ms: query_timeout,
                wall_budget_ms: budget_wall,
                node_budget: budget_nodes,
                dump_invariants,
                stats_out: stats_out.clone(),
                smtlib_log,
            };
            match verify_source(&source, &config) {
                Ok(report) => {
                    let text = report.emit();
                    print!("{text}");
                    if let Some(path) = stats_out {
                        if let Err(e) = std::fs::write(&path, &text) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::from(3);
                        }
                    }
                    match report.verdict {
                        slicer_core::VerdictStatus::Safe => ExitCode::SUCCESS,
                        slicer_core::VerdictStatus::Unknown => ExitCode::from(1),
                    }
                }
                Err(PipelineError::Parse(e)) => {
                    eprintln!("parse error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
