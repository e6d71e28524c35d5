//! Counterexample-driven inductive weakening: annotate lemmas with
//! selector variables, assert the inductiveness query once, and filter
//! lemmas falsified by counterexamples-to-induction via assumptions
//! until the query goes unsat. Includes the abstract-postcondition
//! generalization and the solver-free syntactic fallback.

use crate::cfa::Transition;
use crate::formula::{prime, Formula, Tri, VarName, Version};
use crate::qe::strip_existentials;
use crate::rcnf::{Lemma, RcnfFormula};
use crate::smt::{CheckResult, SolverResult, SolverSession};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU32, Ordering};

static SELECTOR_COUNTER: AtomicU32 = AtomicU32::new(0);

fn fresh_selector() -> VarName {
    let k = SELECTOR_COUNTER.fetch_add(1, Ordering::SeqCst);
    VarName::new(format!("__sel{k}"))
}

/// Selector-to-lemma bindings in annotation order.
#[derive(Debug, Clone)]
pub struct SelectorMap {
    pub entries: Vec<(VarName, Lemma)>,
}

/// Annotates each lemma `l` as `s or l` with a fresh boolean selector:
/// assuming all selectors false recovers the conjunction, assuming a
/// selector true deletes its lemma.
pub fn annotate(phi: &RcnfFormula) -> (SelectorMap, Formula) {
    debug_assert!(!phi.is_bottom(), "cannot annotate bottom");
    let mut entries = Vec::new();
    let mut parts = Vec::new();
    for lemma in phi.lemmas() {
        let sel = fresh_selector();
        parts.push(Formula::or(vec![
            Formula::Atom(crate::formula::Atom::Bool(sel.clone())),
            lemma.formula().clone(),
        ]));
        entries.push((sel, lemma.clone()));
    }
    (SelectorMap { entries }, Formula::and(parts))
}

#[derive(Debug, Clone)]
pub struct WeakeningOutcome {
    pub kept: RcnfFormula,
    pub removed: BTreeSet<Lemma>,
    /// Number of check calls issued by the weakening loop.
    pub sat_query_count: u32,
    /// True when the loop exited on an unsat answer (the kept set is
    /// proven); false when it degraded on an unknown.
    pub unsat_on_exit: bool,
}

/// The largest subset of `phi` closed under `tau`: `kept && tau` implies
/// `kept'`. One constraint is asserted; the loop re-queries purely via
/// assumptions, dropping every lemma the model falsifies (or leaves
/// undetermined) in the primed copy. Drops are permanent.
pub fn counterexample_weakening(
    phi: &RcnfFormula,
    tau: &Transition,
    session: &mut SolverSession,
) -> SolverResult<WeakeningOutcome> {
    weakening_loop(None, phi, tau, session)
}

/// The largest subset of `phi` implied after one `tau` step from `psi`:
/// the strongest postcondition of `psi` in the weakening lattice of
/// `phi`. Same loop with `psi` replacing the annotated left-hand side.
pub fn abstract_postcondition(
    psi: &Formula,
    tau: &Transition,
    phi: &RcnfFormula,
    session: &mut SolverSession,
) -> SolverResult<WeakeningOutcome> {
    weakening_loop(Some(psi), phi, tau, session)
}

fn weakening_loop(
    psi: Option<&Formula>,
    phi: &RcnfFormula,
    tau: &Transition,
    session: &mut SolverSession,
) -> SolverResult<WeakeningOutcome> {
    if phi.is_bottom() {
        // The lattice below bottom is {bottom, top}: bottom survives iff
        // no transition fires at all.
        let lhs = psi.cloned().unwrap_or(Formula::False);
        session.push()?;
        session.assert_formula(&Formula::and(vec![lhs, tau.formula.clone()]))?;
        let result = session.check()?;
        session.pop()?;
        return Ok(match result {
            CheckResult::Unsat => WeakeningOutcome {
                kept: RcnfFormula::Bottom,
                removed: BTreeSet::new(),
                sat_query_count: 1,
                unsat_on_exit: true,
            },
            CheckResult::Sat(_) | CheckResult::Unknown => WeakeningOutcome {
                kept: RcnfFormula::top(),
                removed: BTreeSet::new(),
                sat_query_count: 1,
                unsat_on_exit: matches!(result, CheckResult::Sat(_)),
            },
        });
    }

    let (selectors, annotated) = annotate(phi);
    let annotated_primed = Formula::and(
        selectors
            .entries
            .iter()
            .map(|(sel, lemma)| {
                Formula::or(vec![
                    Formula::Atom(crate::formula::Atom::Bool(sel.clone())),
                    prime(lemma.formula()),
                ])
            })
            .collect(),
    );
    let lhs = match psi {
        Some(p) => p.clone(),
        None => annotated,
    };
    let query = Formula::and(vec![
        lhs,
        tau.formula.clone(),
        Formula::not(annotated_primed),
    ]);

    session.push()?;
    for (sel, _) in &selectors.entries {
        session.declare_bool(sel)?;
    }
    session.assert_formula(&query)?;

    let mut active: Vec<bool> = vec![true; selectors.entries.len()];
    let mut checks = 0u32;
    let mut unsat_on_exit = false;
    loop {
        let assumptions: Vec<(VarName, bool)> = selectors
            .entries
            .iter()
            .zip(&active)
            .map(|((sel, _), live)| (sel.clone(), !live))
            .collect();
        checks += 1;
        match session.check_with_assumptions(&assumptions)? {
            CheckResult::Unsat => {
                unsat_on_exit = true;
                break;
            }
            CheckResult::Unknown => {
                // Never claim inductiveness without an unsat: drop all
                // remaining lemmas.
                for live in active.iter_mut() {
                    *live = false;
                }
                break;
            }
            CheckResult::Sat(model) => {
                let mut progressed = false;
                for (i, (_, lemma)) in selectors.entries.iter().enumerate() {
                    if !active[i] {
                        continue;
                    }
                    match model.eval(&prime(lemma.formula())) {
                        Tri::True => {}
                        Tri::False | Tri::Unknown => {
                            active[i] = false;
                            progressed = true;
                        }
                    }
                }
                if !progressed {
                    session.pop()?;
                    return Err(crate::smt::SolverError::Protocol(
                        "counterexample failed to falsify any active lemma".into(),
                    ));
                }
            }
        }
    }
    session.pop()?;

    let mut kept = Vec::new();
    let mut removed = BTreeSet::new();
    for (i, (_, lemma)) in selectors.entries.iter().enumerate() {
        if active[i] {
            kept.push(lemma.formula().clone());
        } else {
            removed.insert(lemma.clone());
        }
    }
    Ok(WeakeningOutcome {
        kept: RcnfFormula::from_lemmas(kept),
        removed,
        sat_query_count: checks,
        unsat_on_exit,
    })
}

/// Keeps exactly the lemmas whose variables the transition does not
/// modify; no solver involved. A variable counts as modified unless the
/// transition carries its frame equality `v' = v` as a top-level
/// conjunct.
pub fn syntactic_weakening(phi: &RcnfFormula, tau: &Transition) -> RcnfFormula {
    if phi.is_bottom() {
        return RcnfFormula::Bottom;
    }
    let unmodified = frame_preserved_vars(tau);
    let kept: Vec<Formula> = phi
        .lemmas()
        .filter(|l| {
            l.formula()
                .free_vars()
                .iter()
                .all(|v| v.version == Version::Unprimed && unmodified.contains(&v.base))
        })
        .map(|l| l.formula().clone())
        .collect();
    RcnfFormula::from_lemmas(kept)
}

/// Variable bases with a `v' = v` frame equality on the conjunction spine.
pub fn frame_preserved_vars(tau: &Transition) -> BTreeSet<String> {
    let (_, body) = strip_existentials(&tau.formula);
    let spine: Vec<Formula> = match body {
        Formula::And(cs) => cs,
        other => vec![other],
    };
    spine
        .iter()
        .filter_map(crate::formula::frame_copy_base)
        .collect()
}

/// Single inductiveness check: true iff `phi && tau && not phi'` is
/// unsatisfiable. Unknown counts as not proven.
pub fn check_inductive(
    phi: &RcnfFormula,
    tau: &Transition,
    session: &mut SolverSession,
) -> SolverResult<bool> {
    let conj = phi.concretize();
    let query = Formula::and(vec![
        conj.clone(),
        tau.formula.clone(),
        Formula::not(prime(&conj)),
    ]);
    session.push()?;
    session.assert_formula(&query)?;
    let result = session.check()?;
    session.pop()?;
    Ok(matches!(result, CheckResult::Unsat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{LinExpr, SrcCmp};
    use crate::smt::{default_solver_command, SolverSettings};

    fn session() -> SolverSession {
        let cmd = default_solver_command().expect("solver available for tests");
        SolverSession::start(SolverSettings::new(cmd)).expect("start solver")
    }

    fn var(n: &str) -> LinExpr {
        LinExpr::var(VarName::new(n))
    }

    fn pvar(n: &str) -> LinExpr {
        LinExpr::var(VarName::primed(n))
    }

    fn k(n: i64) -> LinExpr {
        LinExpr::constant(n)
    }

    fn transition(parts: Vec<Formula>) -> Transition {
        Transition::new(Formula::and(parts))
    }

    #[test]
    fn annotate_structure() {
        let phi = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Eq, k(0))]);
        let (map, f) = annotate(&phi);
        assert_eq!(map.entries.len(), 1);
        match f {
            Formula::Or(parts) => assert_eq!(parts.len(), 2),
            other => panic!("expected a selector disjunction, got {other}"),
        }
        let empty = RcnfFormula::top();
        let (map, f) = annotate(&empty);
        assert!(map.entries.is_empty());
        assert_eq!(f, Formula::True);
    }

    #[test]
    fn single_counterexample_drops_only_falsified_lemma() {
        // phi = {x = 0, y = 0}, tau: x' = x + 1, y' = y
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Eq, k(0)),
            Formula::cmp(var("y"), SrcCmp::Eq, k(0)),
        ]);
        let tau = transition(vec![
            Formula::cmp(pvar("x"), SrcCmp::Eq, var("x").add(&k(1))),
            Formula::frame_eq("y"),
        ]);
        let mut s = session();
        let out = counterexample_weakening(&phi, &tau, &mut s).unwrap();
        assert!(out.unsat_on_exit);
        let expected = RcnfFormula::from_lemmas([Formula::cmp(var("y"), SrcCmp::Eq, k(0))]);
        assert_eq!(out.kept, expected);
        assert_eq!(out.removed.len(), 1);
        assert!(out.sat_query_count <= phi.len() as u32 + 1);
    }

    #[test]
    fn inductive_set_needs_exactly_one_query() {
        let phi = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Ge, k(0))]);
        let tau = transition(vec![Formula::cmp(
            pvar("x"),
            SrcCmp::Eq,
            var("x").add(&k(1)),
        )]);
        let mut s = session();
        let out = counterexample_weakening(&phi, &tau, &mut s).unwrap();
        assert_eq!(out.kept, phi);
        assert_eq!(out.sat_query_count, 1);
        assert!(out.unsat_on_exit);
    }

    #[test]
    fn single_lemma_with_cti_weakens_to_top() {
        let phi = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Eq, k(0))]);
        let tau = transition(vec![Formula::cmp(
            pvar("x"),
            SrcCmp::Eq,
            var("x").add(&k(1)),
        )]);
        let mut s = session();
        let out = counterexample_weakening(&phi, &tau, &mut s).unwrap();
        assert!(out.kept.is_top());
    }

    #[test]
    fn motivating_sign_lemmas_survive_doubling_loop() {
        // phi = {i = 0, p != 0 => x >= 0, p = 0 => x < 0}
        // tau: i' = i + 1, x' = 2x, p' = p
        let sign_pos = Formula::or(vec![
            Formula::cmp(var("p"), SrcCmp::Eq, k(0)),
            Formula::cmp(var("x"), SrcCmp::Ge, k(0)),
        ]);
        let sign_neg = Formula::or(vec![
            Formula::cmp(var("p"), SrcCmp::Ne, k(0)),
            Formula::cmp(var("x"), SrcCmp::Lt, k(0)),
        ]);
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("i"), SrcCmp::Eq, k(0)),
            sign_pos.clone(),
            sign_neg.clone(),
        ]);
        let tau = transition(vec![
            Formula::cmp(pvar("i"), SrcCmp::Eq, var("i").add(&k(1))),
            Formula::cmp(pvar("x"), SrcCmp::Eq, var("x").scale(2)),
            Formula::frame_eq("p"),
        ]);
        let mut s = session();
        let out = counterexample_weakening(&phi, &tau, &mut s).unwrap();
        let expected = RcnfFormula::from_lemmas([sign_pos, sign_neg]);
        assert_eq!(out.kept, expected);
        assert!(out.unsat_on_exit);
    }

    #[test]
    fn postcondition_false_psi_keeps_everything() {
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Eq, k(0)),
            Formula::cmp(var("y"), SrcCmp::Le, k(5)),
        ]);
        let tau = transition(vec![Formula::frame_eq("x"), Formula::frame_eq("y")]);
        let mut s = session();
        let out = abstract_postcondition(&Formula::False, &tau, &phi, &mut s).unwrap();
        assert_eq!(out.kept, phi);
        assert_eq!(out.sat_query_count, 1);
    }

    #[test]
    fn postcondition_identity_transition_keeps_phi() {
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Eq, k(0)),
            Formula::cmp(var("y"), SrcCmp::Le, k(5)),
        ]);
        let tau = transition(vec![Formula::frame_eq("x"), Formula::frame_eq("y")]);
        let psi = phi.concretize();
        let mut s = session();
        let out = abstract_postcondition(&psi, &tau, &phi, &mut s).unwrap();
        assert_eq!(out.kept, phi);
    }

    #[test]
    fn postcondition_drops_what_psi_does_not_force() {
        // psi = (x = 1), tau identity on x, unconstrained y'.
        // phi = {x = 0, y = 0}: x=0 contradicts psi, y=0 unconstrained.
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Eq, k(0)),
            Formula::cmp(var("y"), SrcCmp::Eq, k(0)),
        ]);
        let tau = transition(vec![Formula::frame_eq("x")]);
        let psi = Formula::cmp(var("x"), SrcCmp::Eq, k(1));
        let mut s = session();
        let out = abstract_postcondition(&psi, &tau, &phi, &mut s).unwrap();
        assert!(out.kept.is_top(), "kept: {}", out.kept);
    }

    #[test]
    fn syntactic_weakening_keeps_only_framed_variables() {
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Gt, k(0)),
            Formula::cmp(var("y"), SrcCmp::Eq, k(0)),
        ]);
        // y' = y + 1 and x' = x with guard x >= 1
        let tau = transition(vec![
            Formula::cmp(pvar("y"), SrcCmp::Eq, var("y").add(&k(1))),
            Formula::frame_eq("x"),
            Formula::cmp(var("x"), SrcCmp::Ge, k(1)),
        ]);
        let out = syntactic_weakening(&phi, &tau);
        let expected = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Gt, k(0))]);
        assert_eq!(out, expected);
        // x > 0 is dropped once x is modified.
        let tau2 = transition(vec![
            Formula::cmp(pvar("x"), SrcCmp::Eq, var("x").add(&k(1))),
            Formula::frame_eq("y"),
        ]);
        let out2 = syntactic_weakening(&phi, &tau2);
        let expected2 = RcnfFormula::from_lemmas([Formula::cmp(var("y"), SrcCmp::Eq, k(0))]);
        assert_eq!(out2, expected2);
        assert!(syntactic_weakening(&RcnfFormula::top(), &tau).is_top());
    }

    #[test]
    fn unconstrained_next_state_counts_as_modified() {
        // x' absent entirely: x is havocked, lemmas over x must go.
        let phi = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Gt, k(0))]);
        let tau = transition(vec![Formula::frame_eq("y")]);
        assert!(syntactic_weakening(&phi, &tau).is_top());
    }

    #[test]
    fn check_inductive_matches_weakening_fixpoints() {
        let mut s = session();
        let tau = transition(vec![Formula::cmp(
            pvar("x"),
            SrcCmp::Eq,
            var("x").add(&k(1)),
        )]);
        let top = RcnfFormula::top();
        assert!(check_inductive(&top, &tau, &mut s).unwrap());
        let ge = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Ge, k(0))]);
        assert!(check_inductive(&ge, &tau, &mut s).unwrap());
        let eq = RcnfFormula::from_lemmas([Formula::cmp(var("x"), SrcCmp::Eq, k(0))]);
        assert!(!check_inductive(&eq, &tau, &mut s).unwrap());
    }

    #[test]
    fn syntactic_subset_of_cex_on_frame_complete_transitions() {
        let phi = RcnfFormula::from_lemmas([
            Formula::cmp(var("x"), SrcCmp::Ge, k(0)),
            Formula::cmp(var("y"), SrcCmp::Eq, k(2)),
        ]);
        let tau = transition(vec![
            Formula::cmp(pvar("x"), SrcCmp::Eq, var("x").add(&k(1))),
            Formula::frame_eq("y"),
        ]);
        let syn = syntactic_weakening(&phi, &tau);
        let mut s = session();
        let cex = counterexample_weakening(&phi, &tau, &mut s).unwrap().kept;
        assert!(syn.subset_of(&cex));
    }
}
