//! Lowers a parsed program to a control-flow automaton with explicit
//! frame conditions and assert-derived error edges.

use super::ast::{BExpr, Expr, Program, Stmt};
use crate::cfa::{Cfa, Edge, NodeId, Transition};
use crate::formula::{Formula, LinExpr, SrcCmp, VarName};
use std::collections::BTreeSet;

struct Lowering {
    edges: Vec<Edge>,
    nodes: BTreeSet<NodeId>,
    next_node: NodeId,
    next_choice: u32,
    variables: BTreeSet<String>,
    error_node: Option<NodeId>,
}

/// Lowers the program: assignments constrain the target's next-state
/// value and frame everything else, `assert(c)` forks a `!c` edge to the
/// single shared error node, and nondeterministic conditions become
/// existentially bound choice variables.
pub fn lower_to_cfa(p: &Program) -> Cfa {
    let mut lowering = Lowering {
        edges: Vec::new(),
        nodes: BTreeSet::new(),
        next_node: 0,
        next_choice: 0,
        variables: p.variables.clone(),
        error_node: None,
    };
    let entry = lowering.fresh_node();
    let exit = lowering.lower_stmts(&p.statements, entry);
    let _ = exit;
    Cfa {
        nodes: lowering.nodes,
        edges: lowering.edges,
        entry,
        variables: lowering.variables,
        error_node: lowering.error_node,
    }
}

impl Lowering {
    fn fresh_node(&mut self) -> NodeId {
        let n = self.next_node;
        self.next_node += 1;
        self.nodes.insert(n);
        n
    }

    fn error_node(&mut self) -> NodeId {
        match self.error_node {
            Some(n) => n,
            None => {
                let n = self.fresh_node();
                self.error_node = Some(n);
                n
            }
        }
    }

    fn edge(&mut self, src: NodeId, formula: Formula, dst: NodeId) {
        self.edges.push(Edge {
            src,
            dst,
            transition: Transition::new(formula),
        });
    }

    /// Frame equalities `v' = v` for every variable not in `assigned`.
    fn frame(&self, assigned: Option<&str>) -> Vec<Formula> {
        self.variables
            .iter()
            .filter(|v| Some(v.as_str()) != assigned)
            .map(|v| Formula::frame_eq(v))
            .collect()
    }

    /// A condition as a formula over unprimed variables; each `nondet()`
    /// occurrence becomes a fresh existentially bound choice variable.
    fn condition(&mut self, c: &BExpr, negated: bool) -> Formula {
        let mut choices = Vec::new();
        let raw = self.bexpr(c, &mut choices);
        let body = if negated { Formula::not(raw) } else { raw };
        Formula::exists(choices, crate::formula::to_nnf(&body))
    }

    fn bexpr(&mut self, c: &BExpr, choices: &mut Vec<VarName>) -> Formula {
        match c {
            BExpr::Cmp(a, op, b) => Formula::cmp(lin(a), *op, lin(b)),
            BExpr::Not(inner) => Formula::not(self.bexpr(inner, choices)),
            BExpr::And(a, b) => {
                Formula::and(vec![self.bexpr(a, choices), self.bexpr(b, choices)])
            }
            BExpr::Or(a, b) => {
                Formula::or(vec![self.bexpr(a, choices), self.bexpr(b, choices)])
            }
            BExpr::Nondet => {
                let v = VarName::mid("__nd", self.next_choice);
                self.next_choice += 1;
                choices.push(v.clone());
                Formula::cmp(LinExpr::var(v), SrcCmp::Ne, LinExpr::constant(0))
            }
        }
    }

    fn guarded(&mut self, cond: Formula) -> Formula {
        let mut parts = self.frame(None);
        parts.push(cond);
        conjoin_under_binders(parts)
    }

    fn lower_stmts(&mut self, stmts: &[Stmt], mut cur: NodeId) -> NodeId {
        for s in stmts {
            cur = self.lower_stmt(s, cur);
        }
        cur
    }

    fn lower_stmt(&mut self, s: &Stmt, cur: NodeId) -> NodeId {
        match s {
            Stmt::Decl(_) => cur,
            Stmt::Skip => {
                let next = self.fresh_node();
                let f = Formula::and(self.frame(None));
                self.edge(cur, f, next);
                next
            }
            Stmt::Assign(x, e) => {
                let next = self.fresh_node();
                let mut parts = self.frame(Some(x));
                parts.push(Formula::cmp(
                    LinExpr::var(VarName::primed(x)),
                    SrcCmp::Eq,
                    lin(e),
                ));
                self.edge(cur, Formula::and(parts), next);
                next
            }
            Stmt::AssignNondet(x) => {
                let next = self.fresh_node();
                let f = Formula::and(self.frame(Some(x)));
                self.edge(cur, f, next);
                next
            }
            Stmt::Assume(c) => {
                let next = self.fresh_node();
                let cond = self.condition(c, false);
                let f = self.guarded(cond);
                self.edge(cur, f, next);
                next
            }
            Stmt::Assert(c) => {
                let next = self.fresh_node();
                let err = self.error_node();
                let violated = self.condition(c, true);
                let f = self.guarded(violated);
                self.edge(cur, f, err);
                let held = self.condition(c, false);
                let f = self.guarded(held);
                self.edge(cur, f, next);
                next
            }
            Stmt::If(c, then_branch, else_branch) => {
                let then_entry = self.fresh_node();
                let taken = self.condition(c, false);
                let f = self.guarded(taken);
                self.edge(cur, f, then_entry);
                let then_exit = self.lower_stmts(then_branch, then_entry);
                let join = self.fresh_node();
                let skipped = self.condition(c, true);
                let f = self.guarded(skipped);
                if else_branch.is_empty() {
                    self.edge(cur, f, join);
                } else {
                    let else_entry = self.fresh_node();
                    self.edge(cur, f, else_entry);
                    let else_exit = self.lower_stmts(else_branch, else_entry);
                    let frame = Formula::and(self.frame(None));
                    self.edge(else_exit, frame, join);
                }
                let frame = Formula::and(self.frame(None));
                self.edge(then_exit, frame, join);
                join
            }
            Stmt::While(c, body) => {
                let head = cur;
                let body_entry = self.fresh_node();
                let enter = self.condition(c, false);
                let f = self.guarded(enter);
                self.edge(head, f, body_entry);
                let body_exit = self.lower_stmts(body, body_entry);
                let frame = Formula::and(self.frame(None));
                self.edge(body_exit, frame, head);
                let exit = self.fresh_node();
                let leave = self.condition(c, true);
                let f = self.guarded(leave);
                self.edge(head, f, exit);
                exit
            }
        }
    }
}

/// Conjoins parts while hoisting any existential binders to the top, so
/// edge formulas keep the `exists B . body` shape.
fn conjoin_under_binders(parts: Vec<Formula>) -> Formula {
    let mut bound = Vec::new();
    let mut body = Vec::new();
    for p in parts {
        match p {
            Formula::Exists(vs, inner) => {
                bound.extend(vs);
                body.push(*inner);
            }
            other => body.push(other),
        }
    }
    Formula::exists(bound, Formula::and(body))
}

fn lin(e: &Expr) -> LinExpr {
    match e {
        Expr::Int(n) => LinExpr::constant(*n),
        Expr::Var(v) => LinExpr::var(VarName::new(v)),
        Expr::Neg(inner) => lin(inner).neg(),
        Expr::Add(a, b) => lin(a).add(&lin(b)),
        Expr::Sub(a, b) => lin(a).add(&lin(b).neg()),
        Expr::Mul(a, b) => match a.const_value() {
            Some(k) => lin(b).scale(k),
            None => lin(a).scale(b.const_value().expect("parser enforces linearity")),
        },
    }
}
