//! Shared driver for the integration suites: runs the pipeline with full
//! access to the intermediate artifacts.

use slicer_core::cfa::{Cfa, NodeId};
use slicer_core::cfa_passes::{compact, default_protected, reduce_to_error};
use slicer_core::engine::{
    check_safety, extract_invariant, run_fixpoint, validate_invariant, Art, EngineConfig,
    EngineStats, VerdictStatus, WeakeningMode,
};
use slicer_core::formula::Formula;
use slicer_core::lang::{lower_to_cfa, parse_program};
use slicer_core::smt::{default_solver_command, SolverSession, SolverSettings};
use std::collections::BTreeMap;

pub fn session() -> SolverSession {
    let cmd = default_solver_command()
        .expect("no solver found: build lia-smt or set SLICER_SOLVER");
    SolverSession::start(SolverSettings::new(cmd)).expect("solver starts")
}

pub struct Pipeline {
    pub raw: Cfa,
    pub compacted: Option<Cfa>,
    pub art: Art,
    pub stats: EngineStats,
    pub invariant: BTreeMap<NodeId, Formula>,
    pub validated: bool,
    pub verdict: VerdictStatus,
}

/// Parse, lower, reduce, compact, slice, validate, verdict — panicking
/// on infrastructure errors so tests fail loudly.
pub fn run_pipeline(source: &str, mode: WeakeningMode) -> Pipeline {
    let program = parse_program(source).expect("test program parses");
    let raw = lower_to_cfa(&program);
    let config = EngineConfig {
        mode,
        ..EngineConfig::default()
    };
    if raw.error_node.is_none() {
        return Pipeline {
            raw,
            compacted: None,
            art: Art::default(),
            stats: EngineStats::default(),
            invariant: BTreeMap::new(),
            validated: true,
            verdict: VerdictStatus::Safe,
        };
    }
    let reduced = reduce_to_error(&raw);
    if reduced.is_empty() || reduced.error_node.is_none() {
        return Pipeline {
            raw,
            compacted: None,
            art: Art::default(),
            stats: EngineStats::default(),
            invariant: BTreeMap::new(),
            validated: true,
            verdict: VerdictStatus::Safe,
        };
    }
    let compacted = compact(&reduced, &default_protected(&reduced), 16);
    let mut s = session();
    let fixpoint = run_fixpoint(&compacted, &config, &mut s).expect("fixpoint runs");
    let invariant = extract_invariant(&fixpoint.art, &compacted);
    // Independent validation and the safety verdict use a fresh session.
    let mut fresh = session();
    let validated =
        validate_invariant(&compacted, &invariant, &mut fresh).expect("validation runs");
    let verdict = if fixpoint.stats.budget_exceeded || !validated {
        VerdictStatus::Unknown
    } else {
        check_safety(&compacted, &invariant, &fixpoint.art, &mut fresh)
            .expect("safety check runs")
            .0
    };
    Pipeline {
        raw,
        compacted: Some(compacted),
        art: fixpoint.art,
        stats: fixpoint.stats,
        invariant,
        validated,
        verdict,
    }
}
