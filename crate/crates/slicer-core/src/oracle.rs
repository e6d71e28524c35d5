//! Independent brute-force ground truth for tests: exact reachability on
//! finite domains, exhaustive weakening-lattice search, and the boolean
//! counter-program generator, plus the seeded random generators the
//! regression suites draw from.

use crate::cfa::{Cfa, NodeId, Transition};
use crate::formula::{eval_tri, Formula, Tri, Value, VarName, Version};
use crate::lang::{lower_to_cfa, parse_program};
use crate::qe::strip_existentials;
use crate::rcnf::{Lemma, RcnfFormula};
use num_bigint::BigInt;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Per-variable value range for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiniteDomain {
    pub lo: i64,
    pub hi: i64,
}

impl FiniteDomain {
    pub fn new(lo: i64, hi: i64) -> FiniteDomain {
        debug_assert!(lo <= hi);
        FiniteDomain { lo, hi }
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + Clone {
        self.lo..=self.hi
    }

    pub fn size(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
}

impl Default for FiniteDomain {
    fn default() -> FiniteDomain {
        FiniteDomain::new(-2, 2)
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration budget exceeded ({0} states)")]
    Budget(usize),
}

/// A concrete data state: one value per variable, in sorted-name order.
pub type DataState = Vec<i64>;

fn assignment_of(vars: &[String], state: &[i64]) -> BTreeMap<VarName, Value> {
    let mut m = BTreeMap::new();
    for (v, val) in vars.iter().zip(state) {
        m.insert(VarName::new(v.clone()), Value::Int(BigInt::from(*val)));
    }
    m
}

fn extend_primed(m: &mut BTreeMap<VarName, Value>, vars: &[String], state: &[i64]) {
    for (v, val) in vars.iter().zip(state) {
        m.insert(VarName::primed(v.clone()), Value::Int(BigInt::from(*val)));
    }
}

fn all_states(vars: &[String], dom: FiniteDomain) -> Vec<DataState> {
    let mut out: Vec<DataState> = vec![Vec::new()];
    for _ in vars {
        let mut next = Vec::with_capacity(out.len() * dom.size());
        for s in &out {
            for v in dom.values() {
                let mut s = s.clone();
                s.push(v);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// Evaluates an edge formula under a pre/post pair; top-level existential
/// binders (nondet choices, residual intermediates) are enumerated over
/// the domain.
pub fn eval_transition(
    tau: &Formula,
    assignment: &BTreeMap<VarName, Value>,
    dom: FiniteDomain,
) -> bool {
    let (bound, body) = strip_existentials(tau);
    let bound: Vec<VarName> = bound.into_iter().collect();
    eval_with_choices(&body, &bound, assignment, dom)
}

fn eval_with_choices(
    body: &Formula,
    bound: &[VarName],
    assignment: &BTreeMap<VarName, Value>,
    dom: FiniteDomain,
) -> bool {
    match bound.split_first() {
        None => match eval_tri(body, assignment) {
            Tri::True => true,
            Tri::False => false,
            Tri::Unknown => panic!("partial assignment in oracle evaluation"),
        },
        Some((v, rest)) => dom.values().any(|val| {
            let mut m = assignment.clone();
            m.insert(v.clone(), Value::Int(BigInt::from(val)));
            eval_with_choices(body, rest, &m, dom)
        }),
    }
}

/// Exact forward closure within the domain: all states at the entry,
/// then every edge applied by enumerating post-states, to a fixpoint.
pub fn enumerate_reachable(
    cfa: &Cfa,
    dom: FiniteDomain,
    budget: usize,
) -> Result<BTreeMap<NodeId, BTreeSet<DataState>>, OracleError> {
    let vars: Vec<String> = cfa.variables.iter().cloned().collect();
    let mut reached: BTreeMap<NodeId, BTreeSet<DataState>> = BTreeMap::new();
    if cfa.nodes.is_empty() {
        return Ok(reached);
    }
    let posts = all_states(&vars, dom);
    let mut queue: VecDeque<(NodeId, DataState)> = VecDeque::new();
    let mut total = 0usize;
    for s in &posts {
        if reached.entry(cfa.entry).or_default().insert(s.clone()) {
            queue.push_back((cfa.entry, s.clone()));
            total += 1;
        }
    }
    while let Some((node, state)) = queue.pop_front() {
        if total > budget {
            return Err(OracleError::Budget(total));
        }
        let pre = assignment_of(&vars, &state);
        for (_, edge) in cfa.outgoing(node) {
            for post in &posts {
                let mut m = pre.clone();
                extend_primed(&mut m, &vars, post);
                if eval_transition(&edge.transition.formula, &m, dom) {
                    let set = reached.entry(edge.dst).or_default();
                    if set.insert(post.clone()) {
                        queue.push_back((edge.dst, post.clone()));
                        total += 1;
                    }
                }
            }
        }
    }
    Ok(reached)
}

/// The union of all subsets of `phi` closed under `tau` within the
/// domain (the unique largest one), computed exhaustively. The caller is
/// responsible for conjoining domain-range constraints into `tau` when
/// comparing against solver-based weakening.
pub fn strongest_weakening_bruteforce(
    phi: &RcnfFormula,
    tau: &Transition,
    dom: FiniteDomain,
) -> RcnfFormula {
    if phi.is_bottom() {
        return RcnfFormula::Bottom;
    }
    let lemmas: Vec<Lemma> = phi.lemmas().cloned().collect();
    assert!(lemmas.len() <= 16, "brute force limited to small lemma sets");
    let mut bases: BTreeSet<String> = BTreeSet::new();
    for l in &lemmas {
        for v in l.formula().free_vars() {
            bases.insert(v.base);
        }
    }
    for v in tau.formula.free_vars() {
        if matches!(v.version, Version::Unprimed | Version::Primed) {
            bases.insert(v.base.clone());
        }
    }
    let vars: Vec<String> = bases.into_iter().collect();
    let states = all_states(&vars, dom);
    let n = states.len();

    // Truth table per lemma over the state space.
    let mut truth: Vec<Vec<bool>> = Vec::with_capacity(lemmas.len());
    for l in &lemmas {
        let mut row = Vec::with_capacity(n);
        for s in &states {
            let m = assignment_of(&vars, s);
            row.push(matches!(eval_tri(l.formula(), &m), Tri::True));
        }
        truth.push(row);
    }
    // Transition successors within the domain.
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in states.iter().enumerate() {
        let pre = assignment_of(&vars, s);
        for (j, t) in states.iter().enumerate() {
            let mut m = pre.clone();
            extend_primed(&mut m, &vars, t);
            if eval_transition(&tau.formula, &m, dom) {
                succ[i].push(j);
            }
        }
    }

    let count = lemmas.len();
    let mut union_mask = 0usize;
    for mask in 0usize..(1 << count) {
        let inductive = (0..n).all(|i| {
            let in_set = (0..count).all(|l| mask & (1 << l) == 0 || truth[l][i]);
            if !in_set {
                return true;
            }
            succ[i]
                .iter()
                .all(|j| (0..count).all(|l| mask & (1 << l) == 0 || truth[l][*j]))
        });
        if inductive {
            union_mask |= mask;
        }
    }
    let kept: Vec<Formula> = lemmas
        .iter()
        .enumerate()
        .filter(|(i, _)| union_mask & (1 << i) != 0)
        .map(|(_, l)| l.formula().clone())
        .collect();
    let result = RcnfFormula::from_lemmas(kept);
    debug_assert!(
        is_inductive_bruteforce(&result, tau, dom),
        "union of inductive subsets must be inductive"
    );
    result
}

/// Exhaustive inductiveness check within the domain.
pub fn is_inductive_bruteforce(phi: &RcnfFormula, tau: &Transition, dom: FiniteDomain) -> bool {
    let conj = phi.concretize();
    let mut bases: BTreeSet<String> = BTreeSet::new();
    for v in conj.free_vars().into_iter().chain(tau.formula.free_vars()) {
        if matches!(v.version, Version::Unprimed | Version::Primed) {
            bases.insert(v.base);
        }
    }
    let vars: Vec<String> = bases.into_iter().collect();
    let states = all_states(&vars, dom);
    for s in &states {
        let pre = assignment_of(&vars, s);
        if eval_tri(&conj, &pre) != Tri::True {
            continue;
        }
        for t in &states {
            let mut m = pre.clone();
            extend_primed(&mut m, &vars, t);
            if eval_transition(&tau.formula, &m, dom) {
                let post = assignment_of(&vars, t);
                if eval_tri(&conj, &post) != Tri::True {
                    return false;
                }
            }
        }
    }
    true
}

/// A closed `exists x-bits . forall y-bits . G` instance; the carrier of
/// the boolean counter-program construction.
#[derive(Debug, Clone)]
pub struct BoolSpec {
    pub m: usize,
    pub n: usize,
    pub g: GFormula,
}

/// Boolean formula over existential bits `X(i)` and universal bits `Y(j)`.
#[derive(Debug, Clone)]
pub enum GFormula {
    X(usize),
    Y(usize),
    Not(Box<GFormula>),
    And(Box<GFormula>, Box<GFormula>),
    Or(Box<GFormula>, Box<GFormula>),
}

impl GFormula {
    fn eval(&self, x: usize, y: usize) -> bool {
        match self {
            GFormula::X(i) => x & (1 << i) != 0,
            GFormula::Y(j) => y & (1 << j) != 0,
            GFormula::Not(g) => !g.eval(x, y),
            GFormula::And(a, b) => a.eval(x, y) && b.eval(x, y),
            GFormula::Or(a, b) => a.eval(x, y) || b.eval(x, y),
        }
    }

    /// Renders `G` with y-bits fixed, as a source-language condition over
    /// `xN == 1` atoms. Constants fold away.
    fn render_with_y(&self, y: usize) -> Cond {
        match self {
            GFormula::X(i) => Cond::Atom(format!("x{i} == 1")),
            GFormula::Y(j) => Cond::Const(y & (1 << j) != 0),
            GFormula::Not(g) => g.render_with_y(y).negate(),
            GFormula::And(a, b) => a.render_with_y(y).and(b.render_with_y(y)),
            GFormula::Or(a, b) => a.render_with_y(y).or(b.render_with_y(y)),
        }
    }
}

/// Tiny condition builder with constant folding, for program text.
enum Cond {
    Const(bool),
    Atom(String),
}

impl Cond {
    fn negate(self) -> Cond {
        match self {
            Cond::Const(b) => Cond::Const(!b),
            Cond::Atom(s) => Cond::Atom(format!("!({s})")),
        }
    }

    fn and(self, other: Cond) -> Cond {
        match (self, other) {
            (Cond::Const(false), _) | (_, Cond::Const(false)) => Cond::Const(false),
            (Cond::Const(true), c) | (c, Cond::Const(true)) => c,
            (Cond::Atom(a), Cond::Atom(b)) => Cond::Atom(format!("({a}) && ({b})")),
        }
    }

    fn or(self, other: Cond) -> Cond {
        match (self, other) {
            (Cond::Const(true), _) | (_, Cond::Const(true)) => Cond::Const(true),
            (Cond::Const(false), c) | (c, Cond::Const(false)) => c,
            (Cond::Atom(a), Cond::Atom(b)) => Cond::Atom(format!("({a}) || ({b})")),
        }
    }

    fn text(self) -> String {
        match self {
            // The grammar has no boolean literals; use ground comparisons.
            Cond::Const(true) => "0 == 0".to_string(),
            Cond::Const(false) => "0 == 1".to_string(),
            Cond::Atom(s) => s,
        }
    }
}

/// Is `exists x . forall y . G` true? Decided by full enumeration.
pub fn psi_satisfiable(spec: &BoolSpec) -> bool {
    (0..(1usize << spec.m)).any(|x| (0..(1usize << spec.n)).all(|y| spec.g.eval(x, y)))
}

/// Source text of the counter program: bits count up while some `y`
/// falsifies `G`, the overflow bit latches on wraparound, and the
/// optional assert claims the overflow bit never sets.
pub fn gen_counter_program_source(spec: &BoolSpec, with_assert: bool) -> String {
    assert!(
        (1..=4).contains(&spec.m) && spec.n <= 4,
        "bit counts out of the supported range"
    );
    let bits: Vec<String> = (0..spec.m).map(|i| format!("x{i}")).collect();
    let mut out = String::new();
    out.push_str(&format!("int {}, o;\n", bits.join(", ")));
    for b in &bits {
        out.push_str(&format!("{b} = 0;\n"));
    }
    out.push_str("o = 0;\n");
    // guard: exists y . not G(x, y), expanded over all y assignments
    let mut guard = Cond::Const(false);
    for y in 0..(1usize << spec.n) {
        guard = guard.or(spec.g.render_with_y(y).negate());
    }
    let all_ones: Vec<String> = bits.iter().map(|b| format!("({b} == 1)")).collect();
    out.push_str("while (nondet()) {\n");
    out.push_str(&format!("  if ({}) {{\n", guard.text()));
    out.push_str(&format!("    if ({}) {{\n", all_ones.join(" && ")));
    out.push_str("      o = 1;\n");
    for b in &bits {
        out.push_str(&format!("      {b} = nondet();\n"));
    }
    out.push_str("    } else {\n");
    out.push_str(&increment_chain(&bits, 3));
    out.push_str("    }\n  }\n}\n");
    if with_assert {
        out.push_str("assert(o == 0);\n");
    }
    out
}

/// Ripple increment: flip the lowest bit, carrying while bits were one.
fn increment_chain(bits: &[String], indent: usize) -> String {
    let pad = "  ".repeat(indent);
    match bits {
        [] => String::new(),
        [last] => {
            // A carry out of the last bit cannot happen here: the
            // all-ones case is handled by the overflow branch.
            format!("{pad}{last} = 1 - {last};\n")
        }
        [first, rest @ ..] => {
            let mut s = format!("{pad}if ({first} == 0) {{\n{pad}  {first} = 1;\n{pad}}} else {{\n{pad}  {first} = 0;\n");
            s.push_str(&increment_chain(rest, indent + 1));
            s.push_str(&format!("{pad}}}\n"));
            s
        }
    }
}

/// The counter program as a CFA (no assert), per the two-node shape:
/// an initialization edge into the loop head and a self-loop.
pub fn gen_counter_program(spec: &BoolSpec) -> Cfa {
    let source = gen_counter_program_source(spec, false);
    let program = parse_program(&source).expect("generated source parses");
    lower_to_cfa(&program)
}

/// Does the counter program admit a nontrivial (not-top) invariant?
/// Exactly when its reachable state space within {0,1} bits is a strict
/// subset of all bit states at the loop head.
pub fn counter_program_has_nontrivial_invariant(spec: &BoolSpec) -> bool {
    let cfa = gen_counter_program(spec);
    let dom = FiniteDomain::new(0, 1);
    let reached = enumerate_reachable(&cfa, dom, 1_000_000).expect("tiny state space");
    let heads = crate::cfa_passes::loop_heads(&cfa);
    let head = *heads.iter().next().expect("counter program has a loop");
    let at_head = reached.get(&head).map(|s| s.len()).unwrap_or(0);
    let full = 1usize << (spec.m + 1);
    at_head < full
}

// --- seeded random generators for the regression corpora ---

/// Random canonical atom over the given variables.
fn random_atom(rng: &mut impl Rng, vars: &[VarName]) -> Formula {
    use crate::formula::{LinExpr, SrcCmp};
    let nterms = rng.gen_range(1..=2.min(vars.len()));
    let mut expr = LinExpr::constant(0);
    let mut used = BTreeSet::new();
    for _ in 0..nterms {
        let v = &vars[rng.gen_range(0..vars.len())];
        if !used.insert(v.clone()) {
            continue;
        }
        let c = *[-2i64, -1, 1, 2].get(rng.gen_range(0..4)).unwrap();
        expr = expr.add(&LinExpr::var(v.clone()).scale(c));
    }
    let k = LinExpr::constant(rng.gen_range(-2..=2));
    let op = match rng.gen_range(0..6) {
        0 => SrcCmp::Eq,
        1 => SrcCmp::Ne,
        2 => SrcCmp::Lt,
        3 => SrcCmp::Le,
        4 => SrcCmp::Gt,
        _ => SrcCmp::Ge,
    };
    Formula::cmp(expr, op, k)
}

/// Random NNF formula of bounded size over `vars`.
pub fn random_nnf(rng: &mut impl Rng, vars: &[VarName], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.4) {
        let atom = random_atom(rng, vars);
        return if rng.gen_bool(0.3) {
            crate::formula::to_nnf(&Formula::not(atom))
        } else {
            atom
        };
    }
    let width = rng.gen_range(2..=3);
    let children: Vec<Formula> = (0..width)
        .map(|_| random_nnf(rng, vars, depth - 1))
        .collect();
    if rng.gen_bool(0.5) {
        Formula::and(children)
    } else {
        Formula::or(children)
    }
}

/// Random weakening instance: a lemma set over up to `max_vars`
/// variables and a transition with full frame-or-update structure plus
/// domain range constraints conjoined into the transition.
pub fn random_weakening_instance(
    rng: &mut impl Rng,
    max_lemmas: usize,
    max_vars: usize,
    dom: FiniteDomain,
) -> (RcnfFormula, Transition) {
    use crate::formula::{LinExpr, SrcCmp};
    let nvars = rng.gen_range(2..=max_vars);
    let vars: Vec<VarName> = (0..nvars)
        .map(|i| VarName::new(format!("v{i}")))
        .collect();
    let nlemmas = rng.gen_range(1..=max_lemmas);
    let mut lemmas = Vec::with_capacity(nlemmas);
    for _ in 0..nlemmas {
        let depth = rng.gen_range(0..=1);
        lemmas.push(random_nnf(rng, &vars, depth));
    }
    let phi = RcnfFormula::from_lemmas(lemmas);

    let mut parts = Vec::new();
    for v in &vars {
        match rng.gen_range(0..4) {
            // frame
            0 | 1 => parts.push(Formula::frame_eq(&v.base)),
            // deterministic update from a random variable
            2 => {
                let src = &vars[rng.gen_range(0..vars.len())];
                let delta = rng.gen_range(-1..=1);
                parts.push(Formula::cmp(
                    LinExpr::var(v.as_primed()),
                    SrcCmp::Eq,
                    LinExpr::var(src.clone()).add(&LinExpr::constant(delta)),
                ));
            }
            // unconstrained (nondet within the range below)
            _ => {}
        }
    }
    if rng.gen_bool(0.5) {
        // a guard over the pre-state
        parts.push(random_atom(rng, &vars));
    }
    // Enforce the domain box on both sides so solver-based weakening and
    // the enumeration oracle see the same universe.
    for v in &vars {
        for name in [v.clone(), v.as_primed()] {
            parts.push(Formula::cmp(
                LinExpr::var(name.clone()),
                SrcCmp::Ge,
                LinExpr::constant(dom.lo),
            ));
            parts.push(Formula::cmp(
                LinExpr::var(name),
                SrcCmp::Le,
                LinExpr::constant(dom.hi),
            ));
        }
    }
    (phi, Transition::new(Formula::and(parts)))
}

/// Random small program staying mostly inside the domain box, with a
/// loop structure up to two deep and optional asserts.
pub fn random_program(rng: &mut impl Rng, max_vars: usize) -> String {
    let nvars = rng.gen_range(1..=max_vars);
    let vars: Vec<String> = (0..nvars).map(|i| format!("v{i}")).collect();
    let mut out = format!("int {};\n", vars.join(", "));
    for v in &vars {
        if rng.gen_bool(0.7) {
            out.push_str(&format!("{v} = {};\n", rng.gen_range(-1..=1)));
        } else {
            out.push_str(&format!("{v} = nondet();\nassume({v} >= -2 && {v} <= 2);\n"));
        }
    }
    gen_stmts(rng, &vars, 2, &mut out);
    // Final assert over some variable; may or may not hold.
    let v = &vars[rng.gen_range(0..vars.len())];
    out.push_str(&format!("assert({v} >= -2 && {v} <= 2);\n"));
    out
}

fn gen_stmts(rng: &mut impl Rng, vars: &[String], loop_depth: usize, out: &mut String) {
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        match rng.gen_range(0..6) {
            0 => {
                let v = &vars[rng.gen_range(0..vars.len())];
                let w = &vars[rng.gen_range(0..vars.len())];
                out.push_str(&format!("{v} = {w} + {};\n", rng.gen_range(-1..=1)));
            }
            1 => {
                let v = &vars[rng.gen_range(0..vars.len())];
                out.push_str(&format!("{v} = {};\n", rng.gen_range(-1..=1)));
            }
            2 if loop_depth > 0 => {
                let v = &vars[rng.gen_range(0..vars.len())];
                let bound = rng.gen_range(0..=2);
                out.push_str(&format!("while (nondet()) {{\nassume({v} < {bound});\n"));
                out.push_str(&format!("{v} = {v} + 1;\n"));
                gen_stmts(rng, vars, loop_depth - 1, out);
                out.push_str("}\n");
            }
            3 => {
                let v = &vars[rng.gen_range(0..vars.len())];
                out.push_str(&format!("if ({v} > 0) {{\n"));
                gen_stmts(rng, vars, 0, out);
                out.push_str("} else {\n");
                gen_stmts(rng, vars, 0, out);
                out.push_str("}\n");
            }
            4 => {
                let v = &vars[rng.gen_range(0..vars.len())];
                out.push_str(&format!("assume({v} <= 2);\n"));
            }
            _ => {
                let v = &vars[rng.gen_range(0..vars.len())];
                let w = &vars[rng.gen_range(0..vars.len())];
                out.push_str(&format!("{v} = {w} - 1;\n"));
            }
        }
    }
}
