//! End-to-end driver and machine-readable reporting: configuration,
//! the parse -> lower -> reduce -> compact -> slice -> validate ->
//! verdict pipeline, and the line-oriented report format.

use crate::cfa::Cfa;
use crate::cfa_passes::{compact, default_protected, reduce_to_error};
use crate::engine::{
    check_safety, extract_invariant, run_fixpoint, validate_invariant, EngineConfig, EngineStats,
    VerdictStatus,
};
pub use crate::engine::WeakeningMode;
use crate::lang::{lower_to_cfa, parse_program, ParseError};
use crate::smt::{SolverError, SolverSession, SolverSettings, SolverStats};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver_command: Vec<String>,
    pub mode: WeakeningMode,
    pub expansion_limit: usize,
    pub query_timeout_ms: u64,
    pub wall_budget_ms: u64,
    pub node_budget: usize,
    pub dump_invariants: bool,
    pub stats_out: Option<PathBuf>,
    pub smtlib_log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            solver_command: Vec::new(),
            mode: WeakeningMode::Cex,
            expansion_limit: crate::rcnf::DEFAULT_EXPANSION_LIMIT,
            query_timeout_ms: 60_000,
            wall_budget_ms: 300_000,
            node_budget: 10_000,
            dump_invariants: false,
            stats_out: None,
            smtlib_log: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a run reports: verdict, per-node invariants in canonical
/// rendering, and solver/weakening statistics.
#[derive(Debug, Clone)]
pub struct Report {
    pub verdict: VerdictStatus,
    pub invariants: BTreeMap<u32, String>,
    pub witness: Option<Vec<usize>>,
    pub solver: SolverStats,
    pub engine: EngineStats,
    pub wall: Duration,
    pub cfa_nodes: usize,
    pub dump_invariants: bool,
}

/// Runs the whole pipeline on source text.
pub fn verify_source(source: &str, config: &RunConfig) -> Result<Report, PipelineError> {
    let started = Instant::now();
    let program = parse_program(source)?;
    let cfa = lower_to_cfa(&program);
    let mut engine_stats = EngineStats::default();
    let mut solver_stats = SolverStats::default();
    let mut invariants = BTreeMap::new();
    let mut witness = None;

    let settings = SolverSettings {
        command: config.solver_command.clone(),
        timeout_ms: config.query_timeout_ms,
        transcript_dir: config.smtlib_log.clone(),
    };
    let engine_config = EngineConfig {
        mode: config.mode,
        expansion_limit: config.expansion_limit,
        node_budget: config.node_budget,
        wall_budget: Duration::from_millis(config.wall_budget_ms),
    };

    let verdict = if cfa.error_node.is_none() {
        // No asserts: nothing to verify.
        VerdictStatus::Safe
    } else {
        let reduced = reduce_to_error(&cfa);
        if reduced.is_empty() || reduced.error_node.is_none() {
            // No path from entry to the error node.
            VerdictStatus::Safe
        } else {
            let compacted = compact(&reduced, &default_protected(&reduced), config.expansion_limit);
            let mut session = SolverSession::start(settings.clone())?;
            let fixpoint = run_fixpoint(&compacted, &engine_config, &mut session)?;
            engine_stats = fixpoint.stats.clone();
            solver_stats = session.stats();
            if fixpoint.stats.budget_exceeded {
                VerdictStatus::Unknown
            } else {
                let inv = extract_invariant(&fixpoint.art, &compacted);
                // Independent post-hoc validation on a fresh session; a
                // safe verdict is only ever emitted after it passes.
                let mut fresh = SolverSession::start(settings)?;
                let valid = validate_invariant(&compacted, &inv, &mut fresh)?;
                let (status, path) = if valid {
                    check_safety(&compacted, &inv, &fixpoint.art, &mut fresh)?
                } else {
                    (VerdictStatus::Unknown, None)
                };
                witness = path;
                for (node, f) in &inv {
                    invariants.insert(*node, f.to_string());
                }
                let fs = fresh.stats();
                solver_stats = add_stats(solver_stats, fs);
                status
            }
        }
    };

    Ok(Report {
        verdict,
        invariants,
        witness,
        solver: solver_stats,
        engine: engine_stats,
        wall: started.elapsed(),
        cfa_nodes: cfa.nodes.len(),
        dump_invariants: config.dump_invariants,
    })
}

fn add_stats(a: SolverStats, b: SolverStats) -> SolverStats {
    SolverStats {
        checks: a.checks + b.checks,
        sat: a.sat + b.sat,
        unsat: a.unsat + b.unsat,
        unknown: a.unknown + b.unknown,
        wall_micros: a.wall_micros + b.wall_micros,
    }
}

impl Report {
    /// Deterministic line-oriented rendering: key/value lines, the
    /// weakening histogram as (query-count, weakening-count) pairs, and
    /// one fenced invariant block per node when dumping is on. Only the
    /// wall-ms line varies between identical runs.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let verdict = match self.verdict {
            VerdictStatus::Safe => "safe",
            VerdictStatus::Unknown => "unknown",
        };
        out.push_str(&format!("verdict: {verdict}\n"));
        out.push_str(&format!("cfa-nodes: {}\n", self.cfa_nodes));
        out.push_str(&format!("art-nodes: {}\n", self.engine.art_nodes));
        out.push_str(&format!("art-covered: {}\n", self.engine.covered_nodes));
        out.push_str(&format!("solver-checks: {}\n", self.solver.checks));
        out.push_str(&format!("solver-sat: {}\n", self.solver.sat));
        out.push_str(&format!("solver-unsat: {}\n", self.solver.unsat));
        out.push_str(&format!("solver-unknown: {}\n", self.solver.unknown));
        out.push_str(&format!(
            "weakenings: {}\n",
            self.engine.weakening_invocations
        ));
        let histogram: Vec<String> = self
            .engine
            .histogram
            .iter()
            .map(|(queries, count)| format!("({queries}, {count})"))
            .collect();
        out.push_str(&format!(
            "weakening-histogram: [{}]\n",
            histogram.join(", ")
        ));
        out.push_str(&format!("cache-hits: {}\n", self.engine.cache_hits));
        if self.engine.budget_exceeded {
            out.push_str("budget-exceeded: true\n");
        }
        if let Some(path) = &self.witness {
            let rendered: Vec<String> = path.iter().map(|id| id.to_string()).collect();
            out.push_str(&format!("witness-path: {}\n", rendered.join(" -> ")));
        }
        out.push_str(&format!("wall-ms: {}\n", self.wall.as_millis()));
        if self.dump_invariants {
            for (node, text) in &self.invariants {
                out.push_str(&format!("invariant node={node}:\n```\n{text}\n```\n"));
            }
        }
        out
    }
}

/// Trivial-safety helper used by tests: reduction result for a CFA.
pub fn reduced_or_trivially_safe(cfa: &Cfa) -> Option<Cfa> {
    cfa.error_node?;
    let reduced = reduce_to_error(cfa);
    if reduced.is_empty() || reduced.error_node.is_none() {
        None
    } else {
        Some(reduced)
    }
}
