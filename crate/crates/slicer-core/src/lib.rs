//! Finds inductive invariants for loop-bearing integer programs by
//! weakening symbolically executed loop preconditions until inductive,
//! guided by counterexamples-to-induction from an SMT solver, then checks
//! safety of assert-derived error locations.

pub mod cfa;
pub mod cfa_passes;
pub mod engine;
pub mod formula;
pub mod lang;
pub mod oracle;
pub mod qe;
pub mod rcnf;
pub mod report;
pub mod smt;
pub mod weakening;

pub use cfa::{Cfa, Edge, NodeId, Transition};
pub use engine::{run_fixpoint, Verdict, VerdictStatus};
pub use formula::{Formula, VarName};
pub use lang::{lower_to_cfa, parse_program, Program};
pub use rcnf::{Lemma, RcnfFormula};
pub use report::{Report, RunConfig, WeakeningMode};
pub use smt::{SolverSession, SolverSettings};
