//! Relaxed conjunctive normal form: a state set as a finite set of
//! quantifier-free lemmas whose conjunction it is, with the conversion
//! rules (flattening, factorization, bounded explicit expansion) that
//! produce a polynomially-sized lemma set.

use crate::formula::{to_nnf, Formula};
use std::collections::BTreeSet;
use std::fmt;

/// A quantifier-free lemma in NNF.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lemma(Formula);

impl Lemma {
    pub fn new(f: Formula) -> Lemma {
        debug_assert!(f.is_quantifier_free(), "lemmas are quantifier-free");
        Lemma(to_nnf(&f))
    }

    pub fn formula(&self) -> &Formula {
        &self.0
    }

    pub fn into_formula(self) -> Formula {
        self.0
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Default bound on explicit cross-product expansion during conversion.
pub const DEFAULT_EXPANSION_LIMIT: usize = 16;

/// A set of lemmas interpreted conjunctively, with a distinguished bottom
/// whose concretization is `false`. Lemma identity is syntactic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RcnfFormula {
    Bottom,
    Lemmas(BTreeSet<Lemma>),
}

impl RcnfFormula {
    pub fn top() -> RcnfFormula {
        RcnfFormula::Lemmas(BTreeSet::new())
    }

    /// Builds a lemma set: `true` lemmas vanish, any `false` lemma
    /// collapses the element to bottom.
    pub fn from_lemmas(lemmas: impl IntoIterator<Item = Formula>) -> RcnfFormula {
        let mut set = BTreeSet::new();
        for f in lemmas {
            match f {
                Formula::True => {}
                Formula::False => return RcnfFormula::Bottom,
                other => {
                    set.insert(Lemma::new(other));
                }
            }
        }
        RcnfFormula::Lemmas(set)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, RcnfFormula::Bottom)
    }

    pub fn is_top(&self) -> bool {
        matches!(self, RcnfFormula::Lemmas(s) if s.is_empty())
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &Lemma> {
        match self {
            RcnfFormula::Bottom => None.into_iter().flatten(),
            RcnfFormula::Lemmas(s) => Some(s.iter()).into_iter().flatten(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RcnfFormula::Bottom => 0,
            RcnfFormula::Lemmas(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, lemma: &Lemma) -> bool {
        matches!(self, RcnfFormula::Lemmas(s) if s.contains(lemma))
    }

    /// Subset on lemma sets; bottom is below everything.
    pub fn subset_of(&self, other: &RcnfFormula) -> bool {
        match (self, other) {
            (RcnfFormula::Bottom, _) => true,
            (_, RcnfFormula::Bottom) => false,
            (RcnfFormula::Lemmas(a), RcnfFormula::Lemmas(b)) => a.is_subset(b),
        }
    }

    /// The represented state set as one formula.
    pub fn concretize(&self) -> Formula {
        match self {
            RcnfFormula::Bottom => Formula::False,
            RcnfFormula::Lemmas(s) => {
                Formula::and(s.iter().map(|l| l.formula().clone()).collect())
            }
        }
    }
}

impl fmt::Display for RcnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.concretize())
    }
}

/// Converts a quantifier-free NNF formula into an equivalent lemma set.
///
/// Rules applied to fixpoint: nested conjunctions are flattened; a common
/// factor is extracted from disjunctions of conjunctions; a disjunction
/// of conjunctions is cross-product-expanded when the running lemma count
/// stays within `expansion_limit`, and expansion depth is limited to one.
/// Anything else stays a single lemma.
pub fn to_rcnf(f: &Formula, expansion_limit: usize) -> RcnfFormula {
    let f = to_nnf(f);
    let mut result: Vec<Formula> = Vec::new();
    // Work items carry a flag allowing one explicit expansion.
    let mut work: Vec<(Formula, bool)> = vec![(f, true)];
    while let Some((g, may_expand)) = work.pop() {
        match g {
            Formula::True => {}
            Formula::False => return RcnfFormula::Bottom,
            Formula::And(children) => {
                for c in children {
                    work.push((c, may_expand));
                }
            }
            Formula::Or(disjuncts) => {
                let sets: Vec<BTreeSet<Formula>> = disjuncts
                    .iter()
                    .map(|d| match d {
                        Formula::And(cs) => cs.iter().cloned().collect(),
                        other => std::iter::once(other.clone()).collect(),
                    })
                    .collect();
                // Factorization: conjuncts common to every disjunct.
                let mut common = sets[0].clone();
                for s in &sets[1..] {
                    common = common.intersection(s).cloned().collect();
                }
                if !common.is_empty() {
                    for c in &common {
                        work.push((c.clone(), may_expand));
                    }
                    let mut residuals = Vec::with_capacity(sets.len());
                    let mut absorbed = false;
                    for s in &sets {
                        let rest: Vec<Formula> =
                            s.difference(&common).cloned().collect();
                        if rest.is_empty() {
                            // This disjunct is the common factor itself, so
                            // the residual disjunction is vacuously true.
                            absorbed = true;
                            break;
                        }
                        residuals.push(Formula::and(rest));
                    }
                    if !absorbed {
                        work.push((Formula::or(residuals), may_expand));
                    }
                    continue;
                }
                // Explicit expansion, bounded by the running lemma count.
                let product = sets.iter().try_fold(1usize, |acc, s| {
                    acc.checked_mul(s.len()).filter(|p| *p <= expansion_limit)
                });
                let running = result.len() + work.len();
                let expandable = may_expand
                    && sets.iter().any(|s| s.len() > 1)
                    && product.is_some_and(|p| running + p <= expansion_limit);
                if expandable {
                    let mut tuples: Vec<Vec<Formula>> = vec![Vec::new()];
                    for s in &sets {
                        let mut next = Vec::new();
                        for t in &tuples {
                            for pick in s {
                                let mut t = t.clone();
                                t.push(pick.clone());
                                next.push(t);
                            }
                        }
                        tuples = next;
                    }
                    for t in tuples {
                        work.push((Formula::or(t), false));
                    }
                } else {
                    result.push(Formula::Or(disjuncts));
                }
            }
            leaf => result.push(leaf),
        }
    }
    RcnfFormula::from_lemmas(result)
}
