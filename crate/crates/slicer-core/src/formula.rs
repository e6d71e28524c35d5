//! Formula AST over linear integer atoms and boolean structure, with the
//! operations the rest of the pipeline builds on: canonical atoms, NNF,
//! capture-free renaming, tristate evaluation, and solver text rendering.

use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Variable versions: `x` (pre-state), `x'` (post-state), or a transient
/// intermediate introduced while composing transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Version {
    Unprimed,
    Primed,
    Mid(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarName {
    pub base: String,
    pub version: Version,
}

impl VarName {
    pub fn new(base: impl Into<String>) -> VarName {
        VarName {
            base: base.into(),
            version: Version::Unprimed,
        }
    }

    pub fn primed(base: impl Into<String>) -> VarName {
        VarName {
            base: base.into(),
            version: Version::Primed,
        }
    }

    pub fn mid(base: impl Into<String>, k: u32) -> VarName {
        VarName {
            base: base.into(),
            version: Version::Mid(k),
        }
    }

    pub fn is_primed(&self) -> bool {
        self.version == Version::Primed
    }

    pub fn as_primed(&self) -> VarName {
        VarName {
            base: self.base.clone(),
            version: Version::Primed,
        }
    }

    pub fn as_unprimed(&self) -> VarName {
        VarName {
            base: self.base.clone(),
            version: Version::Unprimed,
        }
    }

    /// Injective rendering used on the solver wire. `!` cannot occur in
    /// source identifiers, so fresh versions never collide with program
    /// variables.
    pub fn smt_name(&self) -> String {
        match self.version {
            Version::Unprimed => self.base.clone(),
            Version::Primed => format!("{}!", self.base),
            Version::Mid(k) => format!("{}!m{}", self.base, k),
        }
    }

    /// Inverse of [`VarName::smt_name`]; used when reading models back.
    pub fn from_smt_name(name: &str) -> VarName {
        if let Some(stripped) = name.strip_suffix('!') {
            return VarName::primed(stripped);
        }
        if let Some(pos) = name.rfind("!m") {
            if let Ok(k) = name[pos + 2..].parse() {
                return VarName::mid(&name[..pos], k);
            }
        }
        VarName::new(name)
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.smt_name())
    }
}

/// Comparison operators of canonical atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    /// sum <= k
    Le,
    /// sum = k
    Eq,
    /// sum != k
    Ne,
}

/// Source-level comparison operators, lowered to canonical atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrcCmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// Canonical linear atom: sorted gcd-reduced coefficients against a
    /// constant; `Eq`/`Ne` atoms have a positive leading coefficient.
    Lin {
        terms: Vec<(i64, VarName)>,
        op: CmpOp,
        k: i64,
    },
    Bool(VarName),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<VarName>, Box<Formula>),
}

/// Linear expression builder used by the frontend and by substitution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub terms: BTreeMap<VarName, i64>,
    pub konst: i64,
}

impl LinExpr {
    pub fn constant(k: i64) -> LinExpr {
        LinExpr {
            terms: BTreeMap::new(),
            konst: k,
        }
    }

    pub fn var(v: VarName) -> LinExpr {
        let mut terms = BTreeMap::new();
        terms.insert(v, 1);
        LinExpr { terms, konst: 0 }
    }

    pub fn add(mut self, other: &LinExpr) -> LinExpr {
        for (v, c) in &other.terms {
            let e = self.terms.entry(v.clone()).or_insert(0);
            *e = e.checked_add(*c).expect("coefficient overflow");
        }
        self.terms.retain(|_, c| *c != 0);
        self.konst = self
            .konst
            .checked_add(other.konst)
            .expect("constant overflow");
        self
    }

    pub fn neg(mut self) -> LinExpr {
        for c in self.terms.values_mut() {
            *c = -*c;
        }
        self.konst = -self.konst;
        self
    }

    pub fn scale(mut self, factor: i64) -> LinExpr {
        if factor == 0 {
            return LinExpr::constant(0);
        }
        for c in self.terms.values_mut() {
            *c = c.checked_mul(factor).expect("coefficient overflow");
        }
        self.konst = self.konst.checked_mul(factor).expect("constant overflow");
        self
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

impl Formula {
    /// Canonical comparison atom from two linear expressions; ground atoms
    /// fold to constants.
    pub fn cmp(lhs: LinExpr, op: SrcCmp, rhs: LinExpr) -> Formula {
        let (diff, op) = match op {
            SrcCmp::Le => (lhs.add(&rhs.neg()), CmpOp::Le),
            SrcCmp::Lt => (lhs.add(&rhs.neg()).add(&LinExpr::constant(1)), CmpOp::Le),
            SrcCmp::Ge => (rhs.add(&lhs.neg()), CmpOp::Le),
            SrcCmp::Gt => (rhs.add(&lhs.neg()).add(&LinExpr::constant(1)), CmpOp::Le),
            SrcCmp::Eq => (lhs.add(&rhs.neg()), CmpOp::Eq),
            SrcCmp::Ne => (lhs.add(&rhs.neg()), CmpOp::Ne),
        };
        let k = -diff.konst;
        Formula::atom_from_parts(
            diff.terms.into_iter().map(|(v, c)| (c, v)).collect(),
            op,
            k,
        )
    }

    /// Normalizes `sum op k` (terms keyed by variable, already combined).
    pub fn atom_from_parts(mut terms: Vec<(i64, VarName)>, op: CmpOp, mut k: i64) -> Formula {
        terms.retain(|(c, _)| *c != 0);
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        if terms.is_empty() {
            let holds = match op {
                CmpOp::Le => 0 <= k,
                CmpOp::Eq => k == 0,
                CmpOp::Ne => k != 0,
            };
            return if holds { Formula::True } else { Formula::False };
        }
        let mut g = 0;
        for (c, _) in &terms {
            g = gcd(g, *c);
        }
        match op {
            CmpOp::Le => {
                k = div_floor(k, g);
                for (c, _) in terms.iter_mut() {
                    *c /= g;
                }
            }
            CmpOp::Eq | CmpOp::Ne => {
                if k % g != 0 {
                    return if op == CmpOp::Eq {
                        Formula::False
                    } else {
                        Formula::True
                    };
                }
                k /= g;
                for (c, _) in terms.iter_mut() {
                    *c /= g;
                }
                if terms[0].0 < 0 {
                    for (c, _) in terms.iter_mut() {
                        *c = -*c;
                    }
                    k = -k;
                }
            }
        }
        Formula::Atom(Atom::Lin { terms, op, k })
    }

    /// N-ary conjunction: flattens, folds constants, dedups, sorts, and
    /// collapses complementary literals.
    pub fn and(children: Vec<Formula>) -> Formula {
        let mut set = BTreeSet::new();
        let mut stack = children;
        while let Some(c) = stack.pop() {
            match c {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => stack.extend(inner),
                other => {
                    set.insert(other);
                }
            }
        }
        for f in &set {
            if let Some(c) = literal_complement(f) {
                if set.contains(&c) {
                    return Formula::False;
                }
            }
        }
        match set.len() {
            0 => Formula::True,
            1 => set.into_iter().next().expect("one element"),
            _ => Formula::And(set.into_iter().collect()),
        }
    }

    /// N-ary disjunction, dual to [`Formula::and`].
    pub fn or(children: Vec<Formula>) -> Formula {
        let mut set = BTreeSet::new();
        let mut stack = children;
        while let Some(c) = stack.pop() {
            match c {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => stack.extend(inner),
                other => {
                    set.insert(other);
                }
            }
        }
        for f in &set {
            if let Some(c) = literal_complement(f) {
                if set.contains(&c) {
                    return Formula::True;
                }
            }
        }
        match set.len() {
            0 => Formula::False,
            1 => set.into_iter().next().expect("one element"),
            _ => Formula::Or(set.into_iter().collect()),
        }
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn exists(bound: Vec<VarName>, body: Formula) -> Formula {
        if bound.is_empty() {
            return body;
        }
        match body {
            Formula::Exists(mut inner_bound, inner_body) => {
                inner_bound.extend(bound);
                Formula::Exists(inner_bound, inner_body)
            }
            other => Formula::Exists(bound, Box::new(other)),
        }
    }

    /// Equality `v' = v` for a frame-preserved variable.
    pub fn frame_eq(base: &str) -> Formula {
        Formula::cmp(
            LinExpr::var(VarName::primed(base)),
            SrcCmp::Eq,
            LinExpr::var(VarName::new(base)),
        )
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().all(|c| c.is_quantifier_free()),
            Formula::Exists(..) => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_vars(&self, bound: &mut Vec<VarName>, out: &mut BTreeSet<VarName>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(Atom::Bool(v)) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Formula::Atom(Atom::Lin { terms, .. }) => {
                for (_, v) in terms {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
            Formula::Not(f) => f.collect_free_vars(bound, out),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_free_vars(bound, out);
                }
            }
            Formula::Exists(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free_vars(bound, out);
                bound.truncate(n);
            }
        }
    }
}

/// Negation normal form: negations pushed to atoms, negated comparisons
/// rewritten to positive ones over the integers.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(Atom::Bool(v)) => {
            let lit = Formula::Atom(Atom::Bool(v.clone()));
            if negate {
                Formula::Not(Box::new(lit))
            } else {
                lit
            }
        }
        Formula::Atom(Atom::Lin { terms, op, k }) => {
            if !negate {
                return f.clone();
            }
            match op {
                // not (sum <= k)  <=>  -sum <= -k-1
                CmpOp::Le => Formula::atom_from_parts(
                    terms.iter().map(|(c, v)| (-c, v.clone())).collect(),
                    CmpOp::Le,
                    k.checked_neg()
                        .and_then(|k| k.checked_sub(1))
                        .expect("bound overflow"),
                ),
                CmpOp::Eq => Formula::atom_from_parts(terms.clone(), CmpOp::Ne, *k),
                CmpOp::Ne => Formula::atom_from_parts(terms.clone(), CmpOp::Eq, *k),
            }
        }
        Formula::Not(inner) => nnf(inner, !negate),
        Formula::And(cs) => {
            let mapped = cs.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                Formula::or(mapped)
            } else {
                Formula::and(mapped)
            }
        }
        Formula::Or(cs) => {
            let mapped = cs.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                Formula::and(mapped)
            } else {
                Formula::or(mapped)
            }
        }
        Formula::Exists(vs, body) => {
            assert!(!negate, "negation over a binder is not supported");
            Formula::exists(vs.clone(), nnf(body, false))
        }
    }
}

pub type RenameMap = BTreeMap<VarName, VarName>;

#[derive(Debug, thiserror::Error)]
pub enum RenameError {
    #[error("renaming collides with bound variable {0}")]
    BoundCollision(VarName),
}

/// Capture-free substitution of free variables.
pub fn rename(f: &Formula, mapping: &RenameMap) -> Result<Formula, RenameError> {
    match f {
        Formula::True | Formula::False => Ok(f.clone()),
        Formula::Atom(Atom::Bool(v)) => Ok(Formula::Atom(Atom::Bool(
            mapping.get(v).cloned().unwrap_or_else(|| v.clone()),
        ))),
        Formula::Atom(Atom::Lin { terms, op, k }) => {
            let new_terms = terms
                .iter()
                .map(|(c, v)| (*c, mapping.get(v).cloned().unwrap_or_else(|| v.clone())))
                .collect();
            // Renaming is injective on free variables, so no coefficients
            // can merge; renormalize anyway to restore sort order.
            Ok(Formula::atom_from_parts(new_terms, *op, *k))
        }
        Formula::Not(inner) => Ok(Formula::not(rename(inner, mapping)?)),
        Formula::And(cs) => Ok(Formula::and(
            cs.iter()
                .map(|c| rename(c, mapping))
                .collect::<Result<_, _>>()?,
        )),
        Formula::Or(cs) => Ok(Formula::or(
            cs.iter()
                .map(|c| rename(c, mapping))
                .collect::<Result<_, _>>()?,
        )),
        Formula::Exists(vs, body) => {
            for v in vs {
                if mapping.contains_key(v) || mapping.values().any(|t| t == v) {
                    return Err(RenameError::BoundCollision(v.clone()));
                }
            }
            let inner: RenameMap = mapping
                .iter()
                .filter(|(from, _)| !vs.contains(from))
                .map(|(a, b)| (a.clone(), b.clone()))
                .collect();
            Ok(Formula::exists(vs.clone(), rename(body, &inner)?))
        }
    }
}

/// Renames every free unprimed variable to its primed version.
pub fn prime(f: &Formula) -> Formula {
    let mapping: RenameMap = f
        .free_vars()
        .into_iter()
        .filter(|v| v.version == Version::Unprimed)
        .map(|v| (v.clone(), v.as_primed()))
        .collect();
    rename(f, &mapping).expect("priming never collides")
}

/// Renames every free primed variable back to its unprimed version.
pub fn unprime(f: &Formula) -> Formula {
    let mapping: RenameMap = f
        .free_vars()
        .into_iter()
        .filter(|v| v.version == Version::Primed)
        .map(|v| (v.clone(), v.as_unprimed()))
        .collect();
    rename(f, &mapping).expect("unpriming never collides")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }

    fn negate(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

/// Evaluates a quantifier-free formula under a possibly partial
/// assignment, with don't-care propagation: missing variables make an
/// atom `Unknown`, and `Unknown` propagates through the connectives
/// unless short-circuited away.
pub fn eval_tri(f: &Formula, assignment: &BTreeMap<VarName, Value>) -> Tri {
    match f {
        Formula::True => Tri::True,
        Formula::False => Tri::False,
        Formula::Atom(Atom::Bool(v)) => match assignment.get(v) {
            Some(Value::Bool(b)) => Tri::from_bool(*b),
            _ => Tri::Unknown,
        },
        Formula::Atom(Atom::Lin { terms, op, k }) => {
            let mut sum = BigInt::zero();
            for (c, v) in terms {
                match assignment.get(v) {
                    Some(Value::Int(n)) => sum += BigInt::from(*c) * n,
                    _ => return Tri::Unknown,
                }
            }
            let k = BigInt::from(*k);
            Tri::from_bool(match op {
                CmpOp::Le => sum <= k,
                CmpOp::Eq => sum == k,
                CmpOp::Ne => sum != k,
            })
        }
        Formula::Not(inner) => eval_tri(inner, assignment).negate(),
        Formula::And(cs) => {
            let mut result = Tri::True;
            for c in cs {
                match eval_tri(c, assignment) {
                    Tri::False => return Tri::False,
                    Tri::Unknown => result = Tri::Unknown,
                    Tri::True => {}
                }
            }
            result
        }
        Formula::Or(cs) => {
            let mut result = Tri::False;
            for c in cs {
                match eval_tri(c, assignment) {
                    Tri::True => return Tri::True,
                    Tri::Unknown => result = Tri::Unknown,
                    Tri::False => {}
                }
            }
            result
        }
        Formula::Exists(..) => panic!("eval_tri requires a quantifier-free formula"),
    }
}

impl fmt::Display for Formula {
    /// Solver-exchange s-expression syntax; the one canonical rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(Atom::Bool(v)) => write!(f, "{}", v.smt_name()),
            Formula::Atom(Atom::Lin { terms, op, k }) => {
                let lhs = render_sum(terms);
                match op {
                    CmpOp::Le => write!(f, "(<= {} {})", lhs, render_int(*k)),
                    CmpOp::Eq => write!(f, "(= {} {})", lhs, render_int(*k)),
                    CmpOp::Ne => write!(f, "(not (= {} {}))", lhs, render_int(*k)),
                }
            }
            Formula::Not(inner) => write!(f, "(not {inner})"),
            Formula::And(cs) => {
                write!(f, "(and")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            Formula::Or(cs) => {
                write!(f, "(or")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            Formula::Exists(vs, body) => {
                write!(f, "(exists (")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "({} Int)", v.smt_name())?;
                }
                write!(f, ") {body})")
            }
        }
    }
}

/// Exact negation of a literal (integer comparisons negate exactly over
/// the integers); `None` for non-literals.
fn literal_complement(f: &Formula) -> Option<Formula> {
    match f {
        Formula::Atom(_) => Some(to_nnf(&Formula::not(f.clone()))),
        Formula::Not(inner) if matches!(**inner, Formula::Atom(_)) => Some((**inner).clone()),
        _ => None,
    }
}

/// If `f` is the canonical frame equality `v' = v`, returns the base name.
pub fn frame_copy_base(f: &Formula) -> Option<String> {
    if let Formula::Atom(Atom::Lin {
        terms,
        op: CmpOp::Eq,
        k: 0,
    }) = f
    {
        if let [(1, a), (-1, b)] = &terms[..] {
            if a.base == b.base
                && a.version == Version::Unprimed
                && b.version == Version::Primed
            {
                return Some(a.base.clone());
            }
        }
    }
    None
}

fn render_int(k: i64) -> String {
    if k < 0 {
        format!("(- {})", -(k as i128))
    } else {
        k.to_string()
    }
}

fn render_sum(terms: &[(i64, VarName)]) -> String {
    let parts: Vec<String> = terms
        .iter()
        .map(|(c, v)| {
            if *c == 1 {
                v.smt_name()
            } else {
                format!("(* {} {})", render_int(*c), v.smt_name())
            }
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().expect("one part")
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> LinExpr {
        LinExpr::var(VarName::new("x"))
    }

    fn y() -> LinExpr {
        LinExpr::var(VarName::new("y"))
    }

    fn k(n: i64) -> LinExpr {
        LinExpr::constant(n)
    }

    fn b(name: &str) -> Formula {
        Formula::Atom(Atom::Bool(VarName::new(name)))
    }

    #[test]
    fn de_morgan() {
        let a = Formula::cmp(x(), SrcCmp::Le, k(0));
        let bb = b("p");
        let f = Formula::not(Formula::and(vec![a.clone(), bb.clone()]));
        let nnf = to_nnf(&f);
        let expected = Formula::or(vec![to_nnf(&Formula::not(a)), Formula::not(bb)]);
        assert_eq!(nnf, expected);
    }

    #[test]
    fn double_negation() {
        let a = Formula::cmp(x(), SrcCmp::Le, y());
        let f = Formula::not(Formula::not(a.clone()));
        assert_eq!(to_nnf(&f), a);
    }

    #[test]
    fn comparison_flip_in_nnf() {
        // not (x < y or p)  =>  x >= y and not p
        let lt = Formula::cmp(x(), SrcCmp::Lt, y());
        let f = Formula::not(Formula::or(vec![lt, b("p")]));
        let nnf = to_nnf(&f);
        let ge = Formula::cmp(x(), SrcCmp::Ge, y());
        assert_eq!(nnf, Formula::and(vec![ge, Formula::not(b("p"))]));
    }

    #[test]
    fn priming_round_trip() {
        let f = Formula::and(vec![
            Formula::cmp(x(), SrcCmp::Eq, k(0)),
            Formula::cmp(y(), SrcCmp::Eq, x()),
        ]);
        let primed = prime(&f);
        for v in primed.free_vars() {
            assert!(v.is_primed());
        }
        assert_eq!(unprime(&primed), f);
    }

    #[test]
    fn rename_leaves_bound_occurrences() {
        let bound = VarName::mid("x", 0);
        let body = Formula::cmp(
            LinExpr::var(bound.clone()),
            SrcCmp::Eq,
            LinExpr::var(VarName::new("y")),
        );
        let f = Formula::exists(vec![bound.clone()], body);
        let mut mapping = RenameMap::new();
        mapping.insert(VarName::new("y"), VarName::new("z"));
        let renamed = rename(&f, &mapping).unwrap();
        let vars = renamed.free_vars();
        assert!(vars.contains(&VarName::new("z")));
        assert!(!vars.contains(&VarName::new("y")));
        // The bound variable itself must not be renamed.
        let mut bad = RenameMap::new();
        bad.insert(bound, VarName::new("q"));
        assert!(rename(&f, &bad).is_err());
    }

    #[test]
    fn rename_composes_on_disjoint_supports() {
        let f = Formula::cmp(x().add(&y()), SrcCmp::Le, k(4));
        let mut m1 = RenameMap::new();
        m1.insert(VarName::new("x"), VarName::new("a"));
        let mut m2 = RenameMap::new();
        m2.insert(VarName::new("y"), VarName::new("b"));
        let two_step = rename(&rename(&f, &m1).unwrap(), &m2).unwrap();
        let mut composed = m1.clone();
        composed.extend(m2);
        assert_eq!(two_step, rename(&f, &composed).unwrap());
    }

    #[test]
    fn atom_canonicalization_merges_equivalent_writings() {
        // x - y <= -1 written two ways
        let a = Formula::cmp(x(), SrcCmp::Lt, y());
        let b = Formula::cmp(x().add(&k(1)), SrcCmp::Le, y());
        assert_eq!(a, b);
        // 2x = 2y reduces to x = y
        let c = Formula::cmp(x().scale(2), SrcCmp::Eq, y().scale(2));
        let d = Formula::cmp(x(), SrcCmp::Eq, y());
        assert_eq!(c, d);
    }

    #[test]
    fn ground_atoms_fold() {
        assert_eq!(Formula::cmp(k(1), SrcCmp::Le, k(2)), Formula::True);
        assert_eq!(Formula::cmp(k(1), SrcCmp::Gt, k(2)), Formula::False);
        assert_eq!(Formula::cmp(x().scale(2), SrcCmp::Eq, k(3)), Formula::False);
        assert_eq!(Formula::cmp(x().scale(2), SrcCmp::Ne, k(3)), Formula::True);
    }

    #[test]
    fn tristate_evaluation() {
        let f = Formula::cmp(x(), SrcCmp::Gt, k(0));
        let mut m = BTreeMap::new();
        m.insert(VarName::new("x"), Value::Int(BigInt::from(3)));
        assert_eq!(eval_tri(&f, &m), Tri::True);
        let g = Formula::cmp(x(), SrcCmp::Eq, k(0));
        assert_eq!(eval_tri(&g, &m), Tri::False);
        let h = Formula::cmp(y(), SrcCmp::Gt, k(0));
        assert_eq!(eval_tri(&h, &m), Tri::Unknown);
        // Short-circuiting hides the unknown.
        assert_eq!(eval_tri(&Formula::or(vec![f, h.clone()]), &m), Tri::True);
        assert_eq!(eval_tri(&Formula::and(vec![g, h.clone()]), &m), Tri::False);
        assert_eq!(
            eval_tri(&Formula::and(vec![Formula::True, h]), &m),
            Tri::Unknown
        );
    }

    #[test]
    fn rendering_is_solver_syntax() {
        let f = Formula::cmp(x().scale(-2).add(&y()), SrcCmp::Le, k(-3));
        assert_eq!(f.to_string(), "(<= (+ (* (- 2) x) y) (- 3))");
        let n = Formula::cmp(x(), SrcCmp::Ne, k(0));
        assert_eq!(n.to_string(), "(not (= x 0))");
    }

    #[test]
    fn smt_name_round_trip() {
        for v in [
            VarName::new("x"),
            VarName::primed("x"),
            VarName::mid("x", 3),
        ] {
            assert_eq!(VarName::from_smt_name(&v.smt_name()), v);
        }
    }
}
