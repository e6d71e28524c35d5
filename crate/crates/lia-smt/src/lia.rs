//! Decision procedure for conjunctions of linear integer constraints.
//!
//! Implements the Omega test: equalities are eliminated by substitution
//! (with the modulus trick for non-unit coefficients), then variables are
//! projected out of the inequalities through real/dark shadows with
//! splinter enumeration for the inexact cases. Disequalities are handled
//! by case splitting up front. Satisfiable systems yield a model.

use crate::term::{AtomOp, LinAtom, SymId};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TheoryResult {
    Sat(HashMap<SymId, BigInt>),
    Unsat,
    Unknown,
}

/// Internal variable index; input symbols first, fresh sigmas appended.
type Var = u32;

/// Sum of coeffs over vars, compared against `k`.
#[derive(Debug, Clone)]
struct Lin {
    coeffs: BTreeMap<Var, BigInt>,
    k: BigInt,
}

#[derive(Debug, Clone)]
struct Con {
    lin: Lin,
    eq: bool,
}

enum Outcome {
    Sat(HashMap<Var, BigInt>),
    Unsat,
    Unknown,
}

/// Checks a conjunction of atom literals for integer satisfiability.
///
/// `lits` pairs each canonical atom with its asserted polarity. On Sat the
/// model is total on every symbol occurring in `lits`.
pub fn check_lia(lits: &[(LinAtom, bool)], fuel: &mut u64) -> TheoryResult {
    let mut var_of_sym: HashMap<SymId, Var> = HashMap::new();
    let mut sym_of_var: Vec<SymId> = Vec::new();
    let mut local = |sym: SymId, var_of_sym: &mut HashMap<SymId, Var>| -> Var {
        *var_of_sym.entry(sym).or_insert_with(|| {
            sym_of_var.push(sym);
            (sym_of_var.len() - 1) as Var
        })
    };

    let mut cons = Vec::new();
    let mut diseqs = Vec::new();
    for (atom, polarity) in lits {
        let mut coeffs = BTreeMap::new();
        for (sym, c) in &atom.coeffs {
            coeffs.insert(local(*sym, &mut var_of_sym), c.clone());
        }
        let lin = Lin {
            coeffs,
            k: atom.k.clone(),
        };
        match (atom.op, polarity) {
            (AtomOp::Le, true) => cons.push(Con { lin, eq: false }),
            (AtomOp::Le, false) => {
                // not (t <= k)  <=>  -t <= -k-1
                cons.push(Con {
                    lin: lin.negated_le(),
                    eq: false,
                })
            }
            (AtomOp::Eq, true) => cons.push(Con { lin, eq: true }),
            (AtomOp::Eq, false) => diseqs.push(lin),
        }
    }

    let mut next_var = sym_of_var.len() as Var;
    match solve(cons, diseqs, &mut next_var, fuel) {
        Outcome::Unsat => TheoryResult::Unsat,
        Outcome::Unknown => TheoryResult::Unknown,
        Outcome::Sat(mut model) => {
            let mut out = HashMap::new();
            for (sym, var) in &var_of_sym {
                let v = model.remove(var).unwrap_or_else(BigInt::zero);
                out.insert(*sym, v);
            }
            TheoryResult::Sat(out)
        }
    }
}

impl Lin {
    fn negated_le(&self) -> Lin {
        Lin {
            coeffs: self.coeffs.iter().map(|(v, c)| (*v, -c.clone())).collect(),
            k: -self.k.clone() - 1,
        }
    }

    /// Replaces `var` by the affine expression `repl` (valid when the
    /// caller knows var = repl exactly).
    fn substitute(&mut self, var: Var, repl: &Repl) {
        let Some(a) = self.coeffs.remove(&var) else {
            return;
        };
        for (v, c) in &repl.coeffs {
            let e = self.coeffs.entry(*v).or_insert_with(BigInt::zero);
            *e += &a * c;
        }
        self.coeffs.retain(|_, c| !c.is_zero());
        self.k -= &a * &repl.konst;
    }

    /// Evaluates the affine expression `sum + k` (used for bound exprs,
    /// where `k` holds the constant part). Missing variables default to 0
    /// and are recorded in the model.
    fn eval(&self, model: &mut HashMap<Var, BigInt>) -> BigInt {
        let mut acc = self.k.clone();
        for (v, c) in &self.coeffs {
            let val = model.entry(*v).or_insert_with(BigInt::zero);
            acc += c * &*val;
        }
        acc
    }
}

/// Affine expression a variable was solved for: sum of coeffs plus konst.
#[derive(Debug, Clone, Default)]
struct Repl {
    coeffs: BTreeMap<Var, BigInt>,
    konst: BigInt,
}

impl Repl {
    fn eval(&self, model: &mut HashMap<Var, BigInt>) -> BigInt {
        let mut acc = self.konst.clone();
        for (v, c) in &self.coeffs {
            let val = model.entry(*v).or_insert_with(BigInt::zero);
            acc += c * &*val;
        }
        acc
    }
}

/// Symmetric residue of `x` modulo `m`, in the range (-m/2, m/2].
fn smod(x: &BigInt, m: &BigInt) -> BigInt {
    let mut r = x.mod_floor(m);
    if &r * 2 > *m {
        r -= m;
    }
    r
}

fn spend(fuel: &mut u64, amount: u64) -> bool {
    if *fuel < amount {
        *fuel = 0;
        return false;
    }
    *fuel -= amount;
    true
}

fn solve(
    mut cons: Vec<Con>,
    mut diseqs: Vec<Lin>,
    next_var: &mut Var,
    fuel: &mut u64,
) -> Outcome {
    if !spend(fuel, 1 + cons.len() as u64) {
        return Outcome::Unknown;
    }

    // Normalize: drop zero coefficients, gcd-tighten, decide ground facts.
    let mut i = 0;
    while i < cons.len() {
        let con = &mut cons[i];
        con.lin.coeffs.retain(|_, c| !c.is_zero());
        if con.lin.coeffs.is_empty() {
            let holds = if con.eq {
                con.lin.k.is_zero()
            } else {
                !con.lin.k.is_negative()
            };
            if !holds {
                return Outcome::Unsat;
            }
            cons.swap_remove(i);
            continue;
        }
        let mut g = BigInt::zero();
        for c in con.lin.coeffs.values() {
            g = g.gcd(c);
        }
        if !g.is_one() {
            if con.eq {
                if !(&con.lin.k % &g).is_zero() {
                    return Outcome::Unsat;
                }
                con.lin.k = &con.lin.k / &g;
            } else {
                con.lin.k = con.lin.k.div_floor(&g);
            }
            for c in con.lin.coeffs.values_mut() {
                *c = &*c / &g;
            }
        }
        i += 1;
    }
    let mut i = 0;
    while i < diseqs.len() {
        let d = &mut diseqs[i];
        d.coeffs.retain(|_, c| !c.is_zero());
        if d.coeffs.is_empty() {
            if d.k.is_zero() {
                return Outcome::Unsat;
            }
            diseqs.swap_remove(i);
            continue;
        }
        let mut g = BigInt::zero();
        for c in d.coeffs.values() {
            g = g.gcd(c);
        }
        if !g.is_one() {
            if !(&d.k % &g).is_zero() {
                // sum = k is impossible, so the disequality always holds.
                diseqs.swap_remove(i);
                continue;
            }
            d.k = &d.k / &g;
            for c in d.coeffs.values_mut() {
                *c = &*c / &g;
            }
        }
        i += 1;
    }

    // Case-split disequalities.
    if let Some(d) = diseqs.pop() {
        let below = Con {
            lin: Lin {
                coeffs: d.coeffs.clone(),
                k: &d.k - 1,
            },
            eq: false,
        };
        let above = Con {
            lin: d.negated_le(),
            eq: false,
        };
        let mut left = cons.clone();
        left.push(below);
        match solve(left, diseqs.clone(), next_var, fuel) {
            Outcome::Sat(m) => return Outcome::Sat(m),
            Outcome::Unknown => return Outcome::Unknown,
            Outcome::Unsat => {}
        }
        cons.push(above);
        return solve(cons, diseqs, next_var, fuel);
    }

    // Eliminate an equality, preferring one solvable without the modulus step.
    let eq_idx = cons
        .iter()
        .position(|c| c.eq && c.lin.coeffs.values().any(|v| v.abs().is_one()))
        .or_else(|| cons.iter().position(|c| c.eq));
    if let Some(idx) = eq_idx {
        let e = cons.swap_remove(idx);
        let unit = e
            .lin
            .coeffs
            .iter()
            .find(|(_, c)| c.abs().is_one())
            .map(|(v, c)| (*v, c.clone()));
        if let Some((var, c)) = unit {
            let repl = solve_for(&e.lin, var, &c);
            for con in &mut cons {
                con.lin.substitute(var, &repl);
            }
            return match solve(cons, diseqs, next_var, fuel) {
                Outcome::Sat(mut model) => {
                    let v = repl.eval(&mut model);
                    model.insert(var, v);
                    Outcome::Sat(model)
                }
                other => other,
            };
        }
        // Modulus trick: introduce sigma and an auxiliary equation in which
        // the chosen variable has a unit coefficient.
        let (var, a) = e
            .lin
            .coeffs
            .iter()
            .min_by_key(|(v, c)| (c.abs(), **v))
            .map(|(v, c)| (*v, c.clone()))
            .expect("equality has variables");
        let m = a.abs() + 1;
        let sigma = *next_var;
        *next_var += 1;
        let mut aux = Lin {
            coeffs: BTreeMap::new(),
            k: smod(&e.lin.k, &m),
        };
        for (v, c) in &e.lin.coeffs {
            let r = smod(c, &m);
            if !r.is_zero() {
                aux.coeffs.insert(*v, r);
            }
        }
        aux.coeffs.insert(sigma, -m.clone());
        let c = aux.coeffs.get(&var).expect("unit survives smod").clone();
        debug_assert!(c.abs().is_one());
        let repl = solve_for(&aux, var, &c);
        let mut reduced = cons;
        let mut original = e;
        original.lin.substitute(var, &repl);
        reduced.push(original);
        for con in &mut reduced {
            con.lin.substitute(var, &repl);
        }
        return match solve(reduced, diseqs, next_var, fuel) {
            Outcome::Sat(mut model) => {
                let v = repl.eval(&mut model);
                model.insert(var, v);
                Outcome::Sat(model)
            }
            other => other,
        };
    }

    // Only inequalities remain. Finished when no variables are left.
    let mut vars: Vec<Var> = Vec::new();
    for con in &cons {
        for v in con.lin.coeffs.keys() {
            if !vars.contains(v) {
                vars.push(*v);
            }
        }
    }
    if vars.is_empty() {
        return Outcome::Sat(HashMap::new());
    }
    vars.sort();

    // Choose the cheapest variable to project out: one-sided bounds first,
    // then exact shadows, then the smallest lower*upper product.
    let mut best: Option<(u8, usize, Var)> = None;
    for &v in &vars {
        let mut lowers = 0usize;
        let mut uppers = 0usize;
        let mut unit_lowers = true;
        let mut unit_uppers = true;
        for con in &cons {
            match con.lin.coeffs.get(&v) {
                None => {}
                Some(c) if c.is_negative() => {
                    lowers += 1;
                    if !c.abs().is_one() {
                        unit_lowers = false;
                    }
                }
                Some(c) => {
                    uppers += 1;
                    if !c.abs().is_one() {
                        unit_uppers = false;
                    }
                }
            }
        }
        let category = if lowers == 0 || uppers == 0 {
            0
        } else if unit_lowers || unit_uppers {
            1
        } else {
            2
        };
        let key = (category, lowers * uppers, v);
        if best.map_or(true, |b| key < b) {
            best = Some(key);
        }
    }
    let (category, _, var) = best.expect("some variable exists");

    // Split constraints on the chosen variable:
    //   alpha <= a*var   (from negative coefficients)
    //   b*var <= beta    (from positive coefficients)
    let mut lowers: Vec<(BigInt, Lin)> = Vec::new();
    let mut uppers: Vec<(BigInt, Lin)> = Vec::new();
    let mut rest: Vec<Con> = Vec::new();
    let original = cons.clone();
    for mut con in cons {
        match con.lin.coeffs.remove(&var) {
            None => rest.push(con),
            Some(c) if c.is_negative() => {
                // rest + c*var <= k  =>  rest - k <= (-c)*var
                let alpha = Lin {
                    coeffs: con.lin.coeffs,
                    k: -con.lin.k,
                };
                lowers.push((-c, alpha));
            }
            Some(c) => {
                // rest + c*var <= k  =>  c*var <= k - rest
                let beta = Lin {
                    coeffs: con
                        .lin
                        .coeffs
                        .into_iter()
                        .map(|(v, c)| (v, -c))
                        .collect(),
                    k: con.lin.k,
                };
                uppers.push((c, beta));
            }
        }
    }

    if category == 0 {
        // Unbounded on one side: project the variable away entirely.
        return match solve(rest, diseqs, next_var, fuel) {
            Outcome::Sat(mut model) => {
                let v = pick_in_bounds(&lowers, &uppers, &mut model);
                model.insert(var, v);
                Outcome::Sat(model)
            }
            other => other,
        };
    }

    if !spend(fuel, (lowers.len() * uppers.len()) as u64) {
        return Outcome::Unknown;
    }

    let shadow = |dark: bool| -> Vec<Con> {
        let mut out = rest.clone();
        for (a, alpha) in &lowers {
            for (b, beta) in &uppers {
                // b*alpha - a*beta <= slack, slack 0 (real) or -(a-1)(b-1) (dark)
                let mut lin = Lin {
                    coeffs: BTreeMap::new(),
                    k: BigInt::zero(),
                };
                for (v, c) in &alpha.coeffs {
                    lin.coeffs.insert(*v, b * c);
                }
                for (v, c) in &beta.coeffs {
                    let e = lin.coeffs.entry(*v).or_insert_with(BigInt::zero);
                    *e -= a * c;
                }
                lin.coeffs.retain(|_, c| !c.is_zero());
                lin.k = a * &beta.k - b * &alpha.k;
                if dark {
                    lin.k -= (a - 1) * (b - 1);
                }
                out.push(Con { lin, eq: false });
            }
        }
        out
    };

    let exact = category == 1;
    let first = shadow(!exact);
    match solve(first, diseqs.clone(), next_var, fuel) {
        Outcome::Sat(mut model) => {
            let v = pick_in_bounds(&lowers, &uppers, &mut model);
            model.insert(var, v);
            return Outcome::Sat(model);
        }
        Outcome::Unknown => return Outcome::Unknown,
        Outcome::Unsat => {
            if exact {
                return Outcome::Unsat;
            }
        }
    }

    // Dark shadow was empty; consult the real shadow before splintering.
    match solve(shadow(false), diseqs.clone(), next_var, fuel) {
        Outcome::Unsat => return Outcome::Unsat,
        Outcome::Unknown => return Outcome::Unknown,
        Outcome::Sat(_) => {}
    }

    let bmax = uppers
        .iter()
        .map(|(b, _)| b.clone())
        .max()
        .expect("uppers nonempty");
    for (a, alpha) in &lowers {
        if a.abs().is_one() {
            continue;
        }
        let bound = (a * &bmax - a - &bmax).div_floor(&bmax);
        let mut i = BigInt::zero();
        while i <= bound {
            if !spend(fuel, 1) {
                return Outcome::Unknown;
            }
            // Pin a*var = alpha + i and retry on the unsplit system.
            let mut pinned = original.clone();
            let mut lin = Lin {
                coeffs: alpha.coeffs.iter().map(|(v, c)| (*v, -c.clone())).collect(),
                k: &alpha.k + &i,
            };
            lin.coeffs.insert(var, a.clone());
            pinned.push(Con { lin, eq: true });
            match solve(pinned, diseqs.clone(), next_var, fuel) {
                Outcome::Sat(m) => return Outcome::Sat(m),
                Outcome::Unknown => return Outcome::Unknown,
                Outcome::Unsat => {}
            }
            i += 1;
        }
    }
    Outcome::Unsat
}

/// Solves `lin = 0`-style equality `sum = k` for `var` with unit coeff `c`.
fn solve_for(lin: &Lin, var: Var, c: &BigInt) -> Repl {
    let mut repl = Repl::default();
    if c.is_one() {
        // var = k - rest
        for (v, cc) in &lin.coeffs {
            if *v != var {
                repl.coeffs.insert(*v, -cc.clone());
            }
        }
        repl.konst = lin.k.clone();
    } else {
        // -var + rest = k  =>  var = rest - k
        for (v, cc) in &lin.coeffs {
            if *v != var {
                repl.coeffs.insert(*v, cc.clone());
            }
        }
        repl.konst = -lin.k.clone();
    }
    repl
}

/// Picks an integer between the evaluated lower and upper bounds. The
/// caller guarantees such an integer exists when both sides are present.
fn pick_in_bounds(
    lowers: &[(BigInt, Lin)],
    uppers: &[(BigInt, Lin)],
    model: &mut HashMap<Var, BigInt>,
) -> BigInt {
    let lo = lowers
        .iter()
        .map(|(a, alpha)| alpha.eval(model).div_ceil(a))
        .max();
    match lo {
        Some(lo) => lo,
        None => {
            let hi = uppers
                .iter()
                .map(|(b, beta)| beta.eval(model).div_floor(b))
                .min();
            hi.unwrap_or_else(BigInt::zero)
        }
    }
}
