//! The overall fixpoint: an abstract reachability tree is expanded with
//! the slicing transfer relation (seed new candidates by symbolic
//! execution, weaken existing ones until inductive), pruned by coverage
//! checks, and finally read off as a per-location inductive invariant.

use crate::cfa::{Cfa, NodeId, Transition};
use crate::cfa_passes::{live_variables, weak_topological_order, wto_positions};
use crate::formula::{unprime, Formula, Version};
use crate::qe::{eliminate_quantifiers_best_effort, strip_existentials};
use crate::rcnf::{Lemma, RcnfFormula};
use crate::smt::{CheckResult, SolverResult, SolverSession};
use crate::weakening::{
    abstract_postcondition, counterexample_weakening, syntactic_weakening, WeakeningOutcome,
};
use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakeningMode {
    Cex,
    Syntactic,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: WeakeningMode,
    pub expansion_limit: usize,
    pub node_budget: usize,
    pub wall_budget: Duration,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            mode: WeakeningMode::Cex,
            expansion_limit: crate::rcnf::DEFAULT_EXPANSION_LIMIT,
            node_budget: 10_000,
            wall_budget: Duration::from_secs(300),
        }
    }
}

/// Abstract-reachability-tree node: a CFA location, an abstract element,
/// and a backpointer consistent with the CFA edges.
#[derive(Debug, Clone)]
pub struct ArtNode {
    pub id: usize,
    pub cfa_node: NodeId,
    pub element: RcnfFormula,
    pub backpointer: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Art {
    pub nodes: Vec<ArtNode>,
    pub expanded: BTreeSet<usize>,
    pub covered: BTreeSet<usize>,
}

impl Art {
    pub fn uncovered_at(&self, location: NodeId) -> impl Iterator<Item = &ArtNode> {
        self.nodes
            .iter()
            .filter(move |n| n.cfa_node == location && !self.covered.contains(&n.id))
    }

    /// Backpointer chain from `id` back to the root, root last.
    pub fn path_to_root(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut cur = self.nodes[id].backpointer;
        while let Some(b) = cur {
            out.push(b);
            cur = self.nodes[b].backpointer;
        }
        out
    }

    /// Debug dump in the same text digraph style as the CFA.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let mark = if self.covered.contains(&n.id) {
                " [covered]"
            } else if self.expanded.contains(&n.id) {
                " [expanded]"
            } else {
                ""
            };
            match n.backpointer {
                Some(b) => out.push_str(&format!(
                    "{} -> {} : at {} = {}{}\n",
                    b, n.id, n.cfa_node, n.element, mark
                )),
                None => out.push_str(&format!(
                    "root {} : at {} = {}{}\n",
                    n.id, n.cfa_node, n.element, mark
                )),
            }
        }
        out
    }
}

/// Walks the backpointer chain from `from` (inclusive); first node at
/// `target` wins.
pub fn find_sibling(art: &Art, from: usize, target: NodeId) -> Option<&ArtNode> {
    let mut cur = Some(from);
    while let Some(id) = cur {
        let node = &art.nodes[id];
        if node.cfa_node == target {
            return Some(node);
        }
        cur = node.backpointer;
    }
    None
}

/// One weakening invocation: where it ran, what it was given, how many
/// checks it needed, and what it removed.
#[derive(Debug, Clone)]
pub struct WeakeningSite {
    pub edge: usize,
    pub phi: RcnfFormula,
    pub queries: u32,
    pub removed: BTreeSet<Lemma>,
}

#[derive(Debug, Clone, Default)]
pub struct EngineStats {
    pub weakening_invocations: u32,
    /// query count per weakening -> number of weakenings
    pub histogram: BTreeMap<u32, u32>,
    /// every weakening invocation, in order
    pub sites: Vec<WeakeningSite>,
    pub cache_hits: u32,
    pub budget_exceeded: bool,
    pub art_nodes: usize,
    pub covered_nodes: usize,
}

impl EngineStats {
    fn record(&mut self, edge: usize, phi: &RcnfFormula, outcome: &WeakeningOutcome) {
        self.weakening_invocations += 1;
        *self.histogram.entry(outcome.sat_query_count).or_insert(0) += 1;
        self.sites.push(WeakeningSite {
            edge,
            phi: phi.clone(),
            queries: outcome.sat_query_count,
            removed: outcome.removed.clone(),
        });
    }

    /// Removed lemma sets of weakenings that dropped anything, in order.
    pub fn nonempty_drops(&self) -> Vec<BTreeSet<Lemma>> {
        self.sites
            .iter()
            .filter(|s| !s.removed.is_empty())
            .map(|s| s.removed.clone())
            .collect()
    }
}

pub struct FixpointResult {
    pub art: Art,
    pub stats: EngineStats,
}

/// Expands uncovered, unexpanded leaves in weak-topological order
/// (innermost components first) until every node is expanded or covered;
/// the labelled tree then encodes a per-location inductive invariant.
pub fn run_fixpoint(
    cfa: &Cfa,
    config: &EngineConfig,
    session: &mut SolverSession,
) -> SolverResult<FixpointResult> {
    let live = live_variables(cfa);
    let positions = wto_positions(&weak_topological_order(cfa));
    let mut art = Art::default();
    art.nodes.push(ArtNode {
        id: 0,
        cfa_node: cfa.entry,
        element: RcnfFormula::top(),
        backpointer: None,
    });
    let mut stats = EngineStats::default();
    // Known-inductive (edge, element) pairs for self-loop weakenings.
    let mut inductive_cache: BTreeSet<(usize, RcnfFormula)> = BTreeSet::new();
    let started = Instant::now();

    loop {
        if art.nodes.len() > config.node_budget || started.elapsed() > config.wall_budget {
            stats.budget_exceeded = true;
            break;
        }
        let next = art
            .nodes
            .iter()
            .filter(|n| !art.expanded.contains(&n.id) && !art.covered.contains(&n.id))
            .min_by_key(|n| {
                (
                    positions.get(&n.cfa_node).copied().unwrap_or(usize::MAX),
                    n.id,
                )
            })
            .map(|n| n.id);
        let Some(t_id) = next else { break };

        let location = art.nodes[t_id].cfa_node;
        let out_edges: Vec<usize> = cfa.outgoing(location).map(|(i, _)| i).collect();
        let mut created = Vec::new();
        for edge_idx in out_edges {
            let element = transfer_relation(
                cfa,
                edge_idx,
                t_id,
                &art,
                config,
                session,
                &live,
                &mut inductive_cache,
                &mut stats,
            )?;
            let id = art.nodes.len();
            art.nodes.push(ArtNode {
                id,
                cfa_node: cfa.edges[edge_idx].dst,
                element,
                backpointer: Some(t_id),
            });
            created.push(id);
        }
        art.expanded.insert(t_id);

        // Coverage among same-location nodes, both directions, with the
        // syntactic subset test as a fast pre-filter. New nodes prefer
        // being covered over covering, so established nodes stay.
        for c_id in created {
            if art.covered.contains(&c_id) {
                continue;
            }
            let c_loc = art.nodes[c_id].cfa_node;
            let candidates: Vec<usize> = art
                .nodes
                .iter()
                .filter(|u| u.id != c_id && u.cfa_node == c_loc && !art.covered.contains(&u.id))
                .map(|u| u.id)
                .collect();
            for u_id in candidates {
                if covered_by(&art.nodes[c_id].element, &art.nodes[u_id].element, session)? {
                    art.covered.insert(c_id);
                    break;
                }
                if covered_by(&art.nodes[u_id].element, &art.nodes[c_id].element, session)? {
                    art.covered.insert(u_id);
                }
            }
        }
    }
    stats.art_nodes = art.nodes.len();
    stats.covered_nodes = art.covered.len();
    Ok(FixpointResult { art, stats })
}

/// Is `a` covered by `b`, i.e. does the concretization of `a` imply that
/// of `b`?
fn covered_by(
    a: &RcnfFormula,
    b: &RcnfFormula,
    session: &mut SolverSession,
) -> SolverResult<bool> {
    if a.is_bottom() {
        return Ok(true);
    }
    if b.subset_of(a) {
        return Ok(true);
    }
    session.push()?;
    session.assert_formula(&Formula::and(vec![
        a.concretize(),
        Formula::not(b.concretize()),
    ]))?;
    let result = session.check()?;
    session.pop()?;
    Ok(matches!(result, CheckResult::Unsat))
}

#[allow(clippy::too_many_arguments)]
fn transfer_relation(
    cfa: &Cfa,
    edge_idx: usize,
    t_id: usize,
    art: &Art,
    config: &EngineConfig,
    session: &mut SolverSession,
    live: &BTreeMap<NodeId, BTreeSet<String>>,
    inductive_cache: &mut BTreeSet<(usize, RcnfFormula)>,
    stats: &mut EngineStats,
) -> SolverResult<RcnfFormula> {
    let edge = &cfa.edges[edge_idx];
    let t = &art.nodes[t_id];
    if t.element.is_bottom() {
        return Ok(RcnfFormula::Bottom);
    }
    match find_sibling(art, t_id, edge.dst) {
        Some(sibling) => {
            let phi = sibling.element.clone();
            match config.mode {
                WeakeningMode::Syntactic => Ok(syntactic_weakening(&phi, &edge.transition)),
                WeakeningMode::Cex => {
                    if edge.src == edge.dst {
                        // Self-loop: weaken both sides and remember that
                        // the result is inductive under this edge.
                        if inductive_cache.contains(&(edge_idx, phi.clone())) {
                            stats.cache_hits += 1;
                            return Ok(phi);
                        }
                        let out = counterexample_weakening(&phi, &edge.transition, session)?;
                        stats.record(edge_idx, &phi, &out);
                        if out.unsat_on_exit {
                            inductive_cache.insert((edge_idx, out.kept.clone()));
                        }
                        Ok(out.kept)
                    } else {
                        let psi = t.element.concretize();
                        let out = abstract_postcondition(&psi, &edge.transition, &phi, session)?;
                        stats.record(edge_idx, &phi, &out);
                        Ok(out.kept)
                    }
                }
            }
        }
        None => Ok(seed_element(
            &t.element,
            &edge.transition,
            edge.dst,
            live,
            config.expansion_limit,
        )),
    }
}

/// First visit of a location along this branch: existentially quantify
/// the pre-state out of `element && tau`, convert to RCNF, rename to the
/// current state, and discard lemmas without a live variable.
fn seed_element(
    element: &RcnfFormula,
    tau: &Transition,
    target: NodeId,
    live: &BTreeMap<NodeId, BTreeSet<String>>,
    expansion_limit: usize,
) -> RcnfFormula {
    let conj = Formula::and(vec![element.concretize(), tau.formula.clone()]);
    let (mut bound, body) = strip_existentials(&conj);
    for v in body.free_vars() {
        if v.version != Version::Primed {
            bound.insert(v);
        }
    }
    let quantified = Formula::exists(bound.into_iter().collect(), body);
    let rcnf = eliminate_quantifiers_best_effort(&quantified, expansion_limit);
    let RcnfFormula::Lemmas(lemmas) = rcnf else {
        return RcnfFormula::Bottom;
    };
    let live_here = live.get(&target);
    let kept = lemmas.into_iter().filter_map(|lemma| {
        let f = unprime(lemma.formula());
        let vars = f.free_vars();
        // Live-variable filtering applies only to lemmas that mention
        // variables at all; ground lemmas (e.g. false) must stay.
        let keep = vars.is_empty()
            || live_here.is_none_or(|l| vars.iter().any(|v| l.contains(&v.base)));
        keep.then_some(f)
    });
    RcnfFormula::from_lemmas(kept)
}

/// Per-location invariant: the disjunction over concretizations of the
/// uncovered tree nodes at that location; the entry stays top.
pub fn extract_invariant(art: &Art, cfa: &Cfa) -> BTreeMap<NodeId, Formula> {
    let mut out = BTreeMap::new();
    for n in &cfa.nodes {
        let disjuncts: Vec<Formula> = art
            .uncovered_at(*n)
            .map(|t| t.element.concretize())
            .collect();
        out.insert(*n, Formula::or(disjuncts));
    }
    out.insert(cfa.entry, Formula::True);
    out
}

/// Independent consecution check: for every edge `a -tau-> b` the
/// constraint `I(a) && tau && not I(b)'` must be unsatisfiable, and
/// `I(entry)` must be top. Not trusted from the fixpoint.
pub fn validate_invariant(
    cfa: &Cfa,
    invariant: &BTreeMap<NodeId, Formula>,
    session: &mut SolverSession,
) -> SolverResult<bool> {
    if invariant.get(&cfa.entry) != Some(&Formula::True) {
        return Ok(false);
    }
    for edge in &cfa.edges {
        let pre = invariant.get(&edge.src).cloned().unwrap_or(Formula::False);
        let post = invariant.get(&edge.dst).cloned().unwrap_or(Formula::False);
        let query = Formula::and(vec![
            pre,
            edge.transition.formula.clone(),
            Formula::not(crate::formula::prime(&post)),
        ]);
        let (bound, body) = strip_existentials(&query);
        let _ = bound; // choice variables are checked satisfiable as free
        session.push()?;
        session.assert_formula(&body)?;
        let result = session.check()?;
        session.pop()?;
        if !matches!(result, CheckResult::Unsat) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Safe,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub invariant: BTreeMap<NodeId, Formula>,
    pub witness_path: Option<Vec<usize>>,
    pub stats: EngineStats,
}

/// Safe iff the invariant at the error location is unsatisfiable (or the
/// error node is gone); otherwise unknown, with the tree path to an
/// error-labelled node as an abstract witness.
pub fn check_safety(
    cfa: &Cfa,
    invariant: &BTreeMap<NodeId, Formula>,
    art: &Art,
    session: &mut SolverSession,
) -> SolverResult<(VerdictStatus, Option<Vec<usize>>)> {
    let Some(error) = cfa.error_node else {
        return Ok((VerdictStatus::Safe, None));
    };
    let at_error = invariant.get(&error).cloned().unwrap_or(Formula::False);
    session.push()?;
    session.assert_formula(&at_error)?;
    let result = session.check()?;
    session.pop()?;
    if matches!(result, CheckResult::Unsat) {
        return Ok((VerdictStatus::Safe, None));
    }
    // Find a concrete-enough witness: the first uncovered error-location
    // node with a satisfiable element.
    let mut witness = None;
    for t in art.uncovered_at(error) {
        session.push()?;
        session.assert_formula(&t.element.concretize())?;
        let sat = matches!(session.check()?, CheckResult::Sat(_));
        session.pop()?;
        if sat {
            let mut path = art.path_to_root(t.id);
            path.reverse();
            witness = Some(path);
            break;
        }
    }
    Ok((VerdictStatus::Unknown, witness))
}
