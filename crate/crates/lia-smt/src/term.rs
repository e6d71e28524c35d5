//! Typed terms over booleans and linear integer arithmetic.

use crate::sexpr::Sexpr;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::rc::Rc;

pub type SymId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Int,
    Bool,
}

/// A boolean-level term. Integer arithmetic only appears inside atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    True,
    False,
    BoolVar(SymId),
    Not(Rc<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Atom(LinAtom),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomOp {
    /// sum <= k
    Le,
    /// sum = k
    Eq,
}

/// Canonical linear atom: sorted variable coefficients compared to a constant.
///
/// Canonical form: coefficients gcd-reduced; `Eq` atoms have a positive
/// leading coefficient. Ground atoms fold to `Term::True`/`Term::False`
/// during construction, so a `LinAtom` always has at least one variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinAtom {
    pub coeffs: Vec<(SymId, BigInt)>,
    pub k: BigInt,
    pub op: AtomOp,
}

/// A linear integer expression: coefficient map plus constant.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub coeffs: BTreeMap<SymId, BigInt>,
    pub konst: BigInt,
}

impl LinExpr {
    fn constant(k: BigInt) -> LinExpr {
        LinExpr {
            coeffs: BTreeMap::new(),
            konst: k,
        }
    }

    fn var(v: SymId) -> LinExpr {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, BigInt::from(1));
        LinExpr {
            coeffs,
            konst: BigInt::zero(),
        }
    }

    fn add(mut self, other: &LinExpr) -> LinExpr {
        for (v, c) in &other.coeffs {
            let e = self.coeffs.entry(*v).or_insert_with(BigInt::zero);
            *e += c;
        }
        self.konst += &other.konst;
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }

    fn negate(mut self) -> LinExpr {
        for c in self.coeffs.values_mut() {
            *c = -c.clone();
        }
        self.konst = -self.konst;
        self
    }

    fn scale(mut self, factor: &BigInt) -> LinExpr {
        if factor.is_zero() {
            return LinExpr::constant(BigInt::zero());
        }
        for c in self.coeffs.values_mut() {
            *c *= factor;
        }
        self.konst *= factor;
        self
    }

    fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }
}

#[derive(Debug)]
pub struct TermError(pub String);

impl std::fmt::Display for TermError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, TermError> {
    Err(TermError(msg.into()))
}

/// Resolves symbol names to declared ids and sorts.
pub trait SymbolLookup {
    fn lookup(&self, name: &str) -> Option<(SymId, Sort)>;
}

/// Builds `sum op k` in canonical form, folding ground atoms to constants.
pub fn atom_term(lhs: LinExpr, op: AtomOp, rhs: LinExpr) -> Term {
    // Move everything to the left: lhs - rhs op 0, then constant to the right.
    let diff = lhs.add(&rhs.negate());
    let k = -diff.konst.clone();
    let mut coeffs: Vec<(SymId, BigInt)> = diff.coeffs.into_iter().collect();
    if coeffs.is_empty() {
        let holds = match op {
            AtomOp::Le => BigInt::zero() <= k,
            AtomOp::Eq => k.is_zero(),
        };
        return if holds { Term::True } else { Term::False };
    }
    let mut k = k;
    let mut g = BigInt::zero();
    for (_, c) in &coeffs {
        g = g.gcd(c);
    }
    match op {
        AtomOp::Le => {
            // Integer tightening: divide and round the bound down.
            k = k.div_floor(&g);
            for (_, c) in coeffs.iter_mut() {
                *c = &*c / &g;
            }
        }
        AtomOp::Eq => {
            if !(&k % &g).is_zero() {
                return Term::False;
            }
            k = &k / &g;
            for (_, c) in coeffs.iter_mut() {
                *c = &*c / &g;
            }
            if coeffs[0].1.is_negative() {
                for (_, c) in coeffs.iter_mut() {
                    *c = -c.clone();
                }
                k = -k;
            }
        }
    }
    Term::Atom(LinAtom { coeffs, k, op })
}

/// Converts a parsed s-expression into a typed term.
pub fn term_of_sexpr(e: &Sexpr, symbols: &dyn SymbolLookup) -> Result<Term, TermError> {
    let t = bool_term(e, symbols)?;
    Ok(t)
}

fn bool_term(e: &Sexpr, symbols: &dyn SymbolLookup) -> Result<Term, TermError> {
    match e {
        Sexpr::Sym(s) => match s.as_str() {
            "true" => Ok(Term::True),
            "false" => Ok(Term::False),
            _ => match symbols.lookup(s) {
                Some((id, Sort::Bool)) => Ok(Term::BoolVar(id)),
                Some((_, Sort::Int)) => err(format!("symbol {s} is Int, expected Bool")),
                None => err(format!("unknown symbol {s}")),
            },
        },
        Sexpr::Num(_) | Sexpr::Str(_) => err("expected a boolean term"),
        Sexpr::List(items) => {
            let Some(head) = items.first().and_then(|h| h.as_sym()) else {
                return err("expected an operator application");
            };
            let args = &items[1..];
            match head {
                "not" => {
                    if args.len() != 1 {
                        return err("not takes one argument");
                    }
                    Ok(Term::Not(Rc::new(bool_term(&args[0], symbols)?)))
                }
                "and" => Ok(Term::And(
                    args.iter()
                        .map(|a| bool_term(a, symbols))
                        .collect::<Result<_, _>>()?,
                )),
                "or" => Ok(Term::Or(
                    args.iter()
                        .map(|a| bool_term(a, symbols))
                        .collect::<Result<_, _>>()?,
                )),
                "=>" => {
                    if args.len() < 2 {
                        return err("=> takes at least two arguments");
                    }
                    // a => b => c is a right fold.
                    let mut acc = bool_term(args.last().expect("nonempty"), symbols)?;
                    for a in args[..args.len() - 1].iter().rev() {
                        let lhs = bool_term(a, symbols)?;
                        acc = Term::Or(vec![Term::Not(Rc::new(lhs)), acc]);
                    }
                    Ok(acc)
                }
                "ite" => {
                    if args.len() != 3 {
                        return err("ite takes three arguments");
                    }
                    let c = bool_term(&args[0], symbols)?;
                    let t = bool_term(&args[1], symbols)?;
                    let f = bool_term(&args[2], symbols)?;
                    Ok(Term::And(vec![
                        Term::Or(vec![Term::Not(Rc::new(c.clone())), t]),
                        Term::Or(vec![c, f]),
                    ]))
                }
                "=" => {
                    if args.len() < 2 {
                        return err("= takes at least two arguments");
                    }
                    // Chainable; all arguments must share a sort.
                    let mut conj = Vec::new();
                    if is_bool_arg(&args[0], symbols)? {
                        let terms: Vec<Term> = args
                            .iter()
                            .map(|a| bool_term(a, symbols))
                            .collect::<Result<_, _>>()?;
                        for w in terms.windows(2) {
                            conj.push(iff(w[0].clone(), w[1].clone()));
                        }
                    } else {
                        let exprs: Vec<LinExpr> = args
                            .iter()
                            .map(|a| int_expr(a, symbols))
                            .collect::<Result<_, _>>()?;
                        for w in exprs.windows(2) {
                            conj.push(atom_term(w[0].clone(), AtomOp::Eq, w[1].clone()));
                        }
                    }
                    Ok(if conj.len() == 1 {
                        conj.pop().expect("one element")
                    } else {
                        Term::And(conj)
                    })
                }
                "distinct" => {
                    if args.len() != 2 {
                        return err("distinct supported for two arguments");
                    }
                    let a = int_expr(&args[0], symbols)?;
                    let b = int_expr(&args[1], symbols)?;
                    Ok(Term::Not(Rc::new(atom_term(a, AtomOp::Eq, b))))
                }
                "<=" | "<" | ">=" | ">" => {
                    if args.len() != 2 {
                        return err(format!("{head} takes two arguments"));
                    }
                    let a = int_expr(&args[0], symbols)?;
                    let b = int_expr(&args[1], symbols)?;
                    let one = LinExpr::constant(BigInt::from(1));
                    Ok(match head {
                        "<=" => atom_term(a, AtomOp::Le, b),
                        // a < b  <=>  a <= b - 1 over the integers
                        "<" => atom_term(a, AtomOp::Le, b.add(&one.negate())),
                        ">=" => atom_term(b, AtomOp::Le, a),
                        ">" => atom_term(b, AtomOp::Le, a.add(&one.negate())),
                        _ => unreachable!(),
                    })
                }
                _ => err(format!("unsupported boolean operator {head}")),
            }
        }
    }
}

fn iff(a: Term, b: Term) -> Term {
    Term::And(vec![
        Term::Or(vec![Term::Not(Rc::new(a.clone())), b.clone()]),
        Term::Or(vec![a, Term::Not(Rc::new(b))]),
    ])
}

fn is_bool_arg(e: &Sexpr, symbols: &dyn SymbolLookup) -> Result<bool, TermError> {
    match e {
        Sexpr::Num(_) => Ok(false),
        Sexpr::Sym(s) => match s.as_str() {
            "true" | "false" => Ok(true),
            _ => match symbols.lookup(s) {
                Some((_, sort)) => Ok(sort == Sort::Bool),
                None => err(format!("unknown symbol {s}")),
            },
        },
        Sexpr::List(items) => {
            let head = items.first().and_then(|h| h.as_sym()).unwrap_or("");
            Ok(!matches!(head, "+" | "-" | "*" | "ite" if head != "ite")
                && matches!(
                    head,
                    "not" | "and" | "or" | "=>" | "=" | "<=" | "<" | ">=" | ">" | "distinct"
                ))
        }
        Sexpr::Str(_) => err("string in term position"),
    }
}

fn int_expr(e: &Sexpr, symbols: &dyn SymbolLookup) -> Result<LinExpr, TermError> {
    match e {
        Sexpr::Num(n) => Ok(LinExpr::constant(n.clone())),
        Sexpr::Sym(s) => match symbols.lookup(s) {
            Some((id, Sort::Int)) => Ok(LinExpr::var(id)),
            Some((_, Sort::Bool)) => err(format!("symbol {s} is Bool, expected Int")),
            None => err(format!("unknown symbol {s}")),
        },
        Sexpr::Str(_) => err("string in integer position"),
        Sexpr::List(items) => {
            let Some(head) = items.first().and_then(|h| h.as_sym()) else {
                return err("expected an arithmetic operator");
            };
            let args = &items[1..];
            match head {
                "+" => {
                    let mut acc = LinExpr::constant(BigInt::zero());
                    for a in args {
                        acc = acc.add(&int_expr(a, symbols)?);
                    }
                    Ok(acc)
                }
                "-" => match args.len() {
                    1 => Ok(int_expr(&args[0], symbols)?.negate()),
                    0 => err("- takes arguments"),
                    _ => {
                        let mut acc = int_expr(&args[0], symbols)?;
                        for a in &args[1..] {
                            acc = acc.add(&int_expr(a, symbols)?.negate());
                        }
                        Ok(acc)
                    }
                },
                "*" => {
                    let mut konst = BigInt::from(1);
                    let mut var_part: Option<LinExpr> = None;
                    for a in args {
                        let e = int_expr(a, symbols)?;
                        if e.is_constant() {
                            konst *= e.konst;
                        } else if var_part.is_none() {
                            var_part = Some(e);
                        } else {
                            return err("non-linear multiplication");
                        }
                    }
                    Ok(match var_part {
                        Some(e) => e.scale(&konst),
                        None => LinExpr::constant(konst),
                    })
                }
                _ => err(format!("unsupported arithmetic operator {head}")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse_all;
    use std::collections::HashMap;

    struct Table(HashMap<String, (SymId, Sort)>);

    impl SymbolLookup for Table {
        fn lookup(&self, name: &str) -> Option<(SymId, Sort)> {
            self.0.get(name).copied()
        }
    }

    fn table() -> Table {
        let mut m = HashMap::new();
        m.insert("x".to_string(), (0, Sort::Int));
        m.insert("y".to_string(), (1, Sort::Int));
        m.insert("b".to_string(), (2, Sort::Bool));
        Table(m)
    }

    fn conv(s: &str) -> Term {
        let e = parse_all(s).unwrap().remove(0);
        term_of_sexpr(&e, &table()).unwrap()
    }

    #[test]
    fn strict_less_becomes_le_minus_one() {
        // x < y  =>  x - y <= -1
        match conv("(< x y)") {
            Term::Atom(a) => {
                assert_eq!(a.op, AtomOp::Le);
                assert_eq!(a.k, BigInt::from(-1));
            }
            t => panic!("unexpected {t:?}"),
        }
    }

    #[test]
    fn gcd_tightening_on_le() {
        // 2x <= 3  =>  x <= 1
        match conv("(<= (* 2 x) 3)") {
            Term::Atom(a) => {
                assert_eq!(a.coeffs[0].1, BigInt::from(1));
                assert_eq!(a.k, BigInt::from(1));
            }
            t => panic!("unexpected {t:?}"),
        }
    }

    #[test]
    fn infeasible_equality_folds_to_false() {
        // 2x = 3 has no integer solution
        assert_eq!(conv("(= (* 2 x) 3)"), Term::False);
    }

    #[test]
    fn ground_comparison_folds() {
        assert_eq!(conv("(<= 1 2)"), Term::True);
        assert_eq!(conv("(> 1 2)"), Term::False);
    }

    #[test]
    fn nonlinear_rejected() {
        let e = parse_all("(<= (* x y) 1)").unwrap().remove(0);
        assert!(term_of_sexpr(&e, &table()).is_err());
    }

    #[test]
    fn eq_sign_normalization() {
        let a = conv("(= (- y x) 1)");
        let b = conv("(= (- x y) (- 1))");
        assert_eq!(a, b);
    }
}
