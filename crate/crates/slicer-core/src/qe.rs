//! Best-effort elimination of existentially bound variables: solve
//! definitional equalities by substitution, then drop any lemma that
//! still mentions a bound variable. The result over-approximates the
//! input and is quantifier-free.

use crate::formula::{Atom, CmpOp, Formula, LinExpr, VarName};
use crate::rcnf::{to_rcnf, RcnfFormula};
use std::collections::BTreeSet;

/// Splits off every existential binder in a positive-NNF formula.
///
/// Binder names are globally fresh by construction, so hoisting them to
/// the front is sound.
pub fn strip_existentials(f: &Formula) -> (BTreeSet<VarName>, Formula) {
    let mut bound = BTreeSet::new();
    let body = strip(f, &mut bound);
    (bound, body)
}

fn strip(f: &Formula, bound: &mut BTreeSet<VarName>) -> Formula {
    match f {
        Formula::Exists(vs, body) => {
            bound.extend(vs.iter().cloned());
            strip(body, bound)
        }
        Formula::And(cs) => Formula::and(cs.iter().map(|c| strip(c, bound)).collect()),
        Formula::Or(cs) => Formula::or(cs.iter().map(|c| strip(c, bound)).collect()),
        other => other.clone(),
    }
}

/// Replaces an integer variable by an affine expression throughout.
pub fn substitute(f: &Formula, var: &VarName, expr: &LinExpr) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Atom(Atom::Bool(_)) => f.clone(),
        Formula::Atom(Atom::Lin { terms, op, k }) => {
            let Some((a, _)) = terms.iter().find(|(_, v)| v == var) else {
                return f.clone();
            };
            let a = *a;
            let mut combined = LinExpr::default();
            for (c, v) in terms {
                if v != var {
                    combined = combined.add(&LinExpr::var(v.clone()).scale(*c));
                }
            }
            combined = combined.add(&expr.clone().scale(a));
            let k = k
                .checked_sub(
                    combined.konst,
                )
                .expect("constant overflow");
            Formula::atom_from_parts(
                combined.terms.into_iter().map(|(v, c)| (c, v)).collect(),
                *op,
                k,
            )
        }
        Formula::Not(inner) => Formula::not(substitute(inner, var, expr)),
        Formula::And(cs) => {
            Formula::and(cs.iter().map(|c| substitute(c, var, expr)).collect())
        }
        Formula::Or(cs) => Formula::or(cs.iter().map(|c| substitute(c, var, expr)).collect()),
        Formula::Exists(vs, body) => {
            debug_assert!(!vs.contains(var), "substituting a bound variable");
            Formula::exists(vs.clone(), substitute(body, var, expr))
        }
    }
}

/// Finds `v = t` with `v` bound, unit coefficient, conjunctively reachable
/// from the root; returns the variable and the expression it equals.
fn find_definition(f: &Formula, bound: &BTreeSet<VarName>) -> Option<(VarName, LinExpr)> {
    let spine: &[Formula] = match f {
        Formula::And(cs) => cs,
        other => std::slice::from_ref(other),
    };
    for conjunct in spine {
        match conjunct {
            Formula::And(_) => {
                // Constructors flatten nested conjunctions, but recurse to
                // stay correct on any input shape.
                if let Some(found) = find_definition(conjunct, bound) {
                    return Some(found);
                }
            }
            Formula::Atom(Atom::Lin { terms, op: CmpOp::Eq, k }) => {
                for (c, v) in terms {
                    if !bound.contains(v) || c.abs() != 1 {
                        continue;
                    }
                    // v = (k - rest) / c with c = +-1
                    let mut expr = LinExpr::constant(*k);
                    for (oc, ov) in terms {
                        if ov != v {
                            expr = expr.add(&LinExpr::var(ov.clone()).scale(-oc));
                        }
                    }
                    if *c == -1 {
                        expr = expr.neg();
                    }
                    return Some((v.clone(), expr));
                }
            }
            _ => {}
        }
    }
    None
}

/// Applies definitional substitution recursively. At a conjunction, a
/// definition on the spine rewrites the whole subtree; inside a
/// disjunction each disjunct is handled independently, which is sound
/// because the existential distributes over disjunction (and when the
/// variable also occurs outside the disjunction, the rewrite only
/// weakens, never strengthens).
fn solve_definitions(mut f: Formula, bound: &BTreeSet<VarName>) -> Formula {
    loop {
        match find_definition(&f, bound) {
            Some((var, expr)) => f = substitute(&f, &var, &expr),
            None => break,
        }
    }
    match f {
        Formula::And(cs) => Formula::and(
            cs.into_iter()
                .map(|c| match c {
                    Formula::Or(_) => solve_definitions(c, bound),
                    other => other,
                })
                .collect(),
        ),
        Formula::Or(ds) => Formula::or(
            ds.into_iter()
                .map(|d| solve_definitions(d, bound))
                .collect(),
        ),
        other => other,
    }
}

/// Best-effort existential elimination.
///
/// Step 1 substitutes definitional equalities of bound variables to a
/// fixpoint; step 2 converts to RCNF and drops every lemma that still
/// contains a bound variable. The result is implied by the input.
pub fn eliminate_quantifiers_best_effort(f: &Formula, expansion_limit: usize) -> RcnfFormula {
    let (bound, body) = strip_existentials(f);
    if bound.is_empty() {
        return to_rcnf(&body, expansion_limit);
    }
    let body = solve_definitions(body, &bound);
    match to_rcnf(&body, expansion_limit) {
        RcnfFormula::Bottom => RcnfFormula::Bottom,
        RcnfFormula::Lemmas(lemmas) => RcnfFormula::Lemmas(
            lemmas
                .into_iter()
                .filter(|l| l.formula().free_vars().is_disjoint(&bound))
                .collect(),
        ),
    }
}
