//! Command interpreter: incremental assertion frames, declarations,
//! checking, and model printing.

use crate::sexpr::Sexpr;
use crate::solve::{check, SolveModel, Status, TheoryLemma};
use crate::term::{term_of_sexpr, Sort, SymId, SymbolLookup, Term};
use num_bigint::BigInt;
use num_traits::Signed;
use std::collections::HashMap;

pub struct Engine {
    print_success: bool,
    frames: Vec<Frame>,
    symbols: HashMap<String, (SymId, Sort)>,
    names: Vec<String>,
    last_model: Option<SolveModel>,
    last_status: Option<Status>,
    /// Theory conflicts learned so far; valid across checks.
    learned: Vec<TheoryLemma>,
    budget: u64,
    pub exited: bool,
}

#[derive(Default)]
struct Frame {
    asserts: Vec<Term>,
    decls: Vec<String>,
}

struct Symbols<'a>(&'a HashMap<String, (SymId, Sort)>);

impl SymbolLookup for Symbols<'_> {
    fn lookup(&self, name: &str) -> Option<(SymId, Sort)> {
        self.0.get(name).copied()
    }
}

impl Engine {
    pub fn new(budget: u64) -> Engine {
        Engine {
            print_success: false,
            frames: vec![Frame::default()],
            symbols: HashMap::new(),
            names: Vec::new(),
            last_model: None,
            last_status: None,
            learned: Vec::new(),
            budget,
            exited: false,
        }
    }

    /// Executes one command, returning the lines to print.
    pub fn execute(&mut self, input: &Sexpr) -> Vec<String> {
        match self.dispatch(input) {
            Ok(lines) => lines,
            Err(msg) => vec![format!("(error \"{}\")", msg.replace('"', "'"))],
        }
    }

    fn success(&self) -> Vec<String> {
        if self.print_success {
            vec!["success".to_string()]
        } else {
            Vec::new()
        }
    }

    fn dispatch(&mut self, input: &Sexpr) -> Result<Vec<String>, String> {
        let items = input
            .as_list()
            .ok_or_else(|| "expected a command".to_string())?;
        let head = items
            .first()
            .and_then(|h| h.as_sym())
            .ok_or_else(|| "expected a command name".to_string())?;
        let args = &items[1..];
        match head {
            "set-option" => {
                if let (Some(Sexpr::Sym(key)), Some(value)) = (args.first(), args.get(1)) {
                    if key == ":print-success" {
                        self.print_success = value.as_sym() == Some("true");
                    }
                }
                Ok(self.success())
            }
            "set-logic" | "set-info" => Ok(self.success()),
            "get-info" => match args.first().and_then(|a| a.as_sym()) {
                Some(":name") => Ok(vec!["(:name \"lia-smt\")".to_string()]),
                Some(":version") => Ok(vec!["(:version \"0.1.0\")".to_string()]),
                Some(k) => Ok(vec![format!("({k} \"unknown\")")]),
                None => Err("get-info takes a keyword".into()),
            },
            "declare-fun" => {
                let name = args
                    .first()
                    .and_then(|a| a.as_sym())
                    .ok_or("declare-fun needs a symbol")?;
                let params = args.get(1).and_then(|a| a.as_list()).ok_or("bad params")?;
                if !params.is_empty() {
                    return Err("only constants are supported".into());
                }
                let sort = sort_of(args.get(2))?;
                self.declare(name, sort)?;
                Ok(self.success())
            }
            "declare-const" => {
                let name = args
                    .first()
                    .and_then(|a| a.as_sym())
                    .ok_or("declare-const needs a symbol")?;
                let sort = sort_of(args.get(1))?;
                self.declare(name, sort)?;
                Ok(self.success())
            }
            "assert" => {
                let e = args.first().ok_or("assert takes a term")?;
                let t = term_of_sexpr(e, &Symbols(&self.symbols)).map_err(|e| e.0)?;
                self.frames
                    .last_mut()
                    .expect("base frame always present")
                    .asserts
                    .push(t);
                Ok(self.success())
            }
            "push" => {
                let n = level_arg(args)?;
                for _ in 0..n {
                    self.frames.push(Frame::default());
                }
                Ok(self.success())
            }
            "pop" => {
                let n = level_arg(args)?;
                if n as usize >= self.frames.len() {
                    return Err("pop underflow".into());
                }
                for _ in 0..n {
                    let frame = self.frames.pop().expect("checked above");
                    for name in frame.decls {
                        self.symbols.remove(&name);
                    }
                }
                Ok(self.success())
            }
            "check-sat" => Ok(vec![self.run_check(&[])?]),
            "check-sat-assuming" => {
                let lits = args
                    .first()
                    .and_then(|a| a.as_list())
                    .ok_or("check-sat-assuming takes a literal list")?;
                let mut assumptions = Vec::new();
                for l in lits {
                    assumptions.push(self.assumption_literal(l)?);
                }
                Ok(vec![self.run_check(&assumptions)?])
            }
            "get-model" => {
                let model = self
                    .last_model
                    .as_ref()
                    .ok_or("no model available")?
                    .clone();
                Ok(self.format_model(&model))
            }
            "get-value" => {
                let wanted = args
                    .first()
                    .and_then(|a| a.as_list())
                    .ok_or("get-value takes a term list")?;
                if self.last_status != Some(Status::Sat) {
                    return Err("no model available".into());
                }
                let model = self.last_model.clone().unwrap_or_default();
                let mut parts = Vec::new();
                for w in wanted {
                    let name = w.as_sym().ok_or("get-value supports symbols only")?;
                    let (id, sort) = *self
                        .symbols
                        .get(name)
                        .ok_or_else(|| format!("unknown symbol {name}"))?;
                    let rendered = match sort {
                        Sort::Bool => model
                            .bools
                            .get(&id)
                            .map(|b| b.to_string())
                            .unwrap_or_else(|| "false".to_string()),
                        Sort::Int => render_int(
                            &model.ints.get(&id).cloned().unwrap_or_else(|| 0.into()),
                        ),
                    };
                    parts.push(format!("({name} {rendered})"));
                }
                Ok(vec![format!("({})", parts.join(" "))])
            }
            "echo" => match args.first() {
                Some(Sexpr::Str(s)) => Ok(vec![s.clone()]),
                _ => Err("echo takes a string".into()),
            },
            "reset" => {
                *self = Engine::new(self.budget);
                Ok(self.success())
            }
            "exit" => {
                self.exited = true;
                Ok(self.success())
            }
            _ => Err(format!("unsupported command {head}")),
        }
    }

    fn declare(&mut self, name: &str, sort: Sort) -> Result<(), String> {
        if self.symbols.contains_key(name) {
            return Err(format!("symbol {name} already declared"));
        }
        let id = self.names.len() as SymId;
        self.names.push(name.to_string());
        self.symbols.insert(name.to_string(), (id, sort));
        self.frames
            .last_mut()
            .expect("base frame always present")
            .decls
            .push(name.to_string());
        Ok(())
    }

    fn assumption_literal(&self, l: &Sexpr) -> Result<(SymId, bool), String> {
        let (name, positive) = match l {
            Sexpr::Sym(s) => (s.as_str(), true),
            Sexpr::List(items) => {
                if items.len() == 2 && items[0].as_sym() == Some("not") {
                    match &items[1] {
                        Sexpr::Sym(s) => (s.as_str(), false),
                        _ => return Err("assumption must be a boolean literal".into()),
                    }
                } else {
                    return Err("assumption must be a boolean literal".into());
                }
            }
            _ => return Err("assumption must be a boolean literal".into()),
        };
        match self.symbols.get(name) {
            Some((id, Sort::Bool)) => Ok((*id, positive)),
            Some(_) => Err(format!("assumption {name} is not Bool")),
            None => Err(format!("unknown symbol {name}")),
        }
    }

    fn run_check(&mut self, assumptions: &[(SymId, bool)]) -> Result<String, String> {
        let assertions: Vec<Term> = self
            .frames
            .iter()
            .flat_map(|f| f.asserts.iter().cloned())
            .collect();
        let mut fuel = self.budget;
        let (status, model) = check(&assertions, assumptions, &mut self.learned, &mut fuel);
        self.last_status = Some(status);
        self.last_model = model;
        Ok(match status {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
        }
        .to_string())
    }

    fn format_model(&self, model: &SolveModel) -> Vec<String> {
        let mut entries: Vec<(String, String, String)> = Vec::new();
        for (sym, value) in &model.bools {
            let name = &self.names[*sym as usize];
            // A popped declaration can linger in an old model; skip it.
            if self.symbols.get(name).map(|(id, _)| id) != Some(sym) {
                continue;
            }
            entries.push((name.clone(), "Bool".to_string(), value.to_string()));
        }
        for (sym, value) in &model.ints {
            let name = &self.names[*sym as usize];
            if self.symbols.get(name).map(|(id, _)| id) != Some(sym) {
                continue;
            }
            entries.push((name.clone(), "Int".to_string(), render_int(value)));
        }
        entries.sort();
        let mut out = Vec::with_capacity(entries.len() + 2);
        out.push("(".to_string());
        for (name, sort, value) in entries {
            out.push(format!("  (define-fun {name} () {sort} {value})"));
        }
        out.push(")".to_string());
        out
    }
}

fn render_int(n: &BigInt) -> String {
    if n.is_negative() {
        format!("(- {})", -n.clone())
    } else {
        n.to_string()
    }
}

fn sort_of(e: Option<&Sexpr>) -> Result<Sort, String> {
    match e.and_then(|e| e.as_sym()) {
        Some("Int") => Ok(Sort::Int),
        Some("Bool") => Ok(Sort::Bool),
        other => Err(format!("unsupported sort {other:?}")),
    }
}

fn level_arg(args: &[Sexpr]) -> Result<u32, String> {
    match args.first() {
        None => Ok(1),
        Some(Sexpr::Num(n)) => u32::try_from(n.clone()).map_err(|_| "bad level".to_string()),
        Some(_) => Err("push/pop take a numeral".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse_all;

    fn run(engine: &mut Engine, script: &str) -> Vec<String> {
        let mut out = Vec::new();
        for cmd in parse_all(script).unwrap() {
            out.extend(engine.execute(&cmd));
        }
        out
    }

    #[test]
    fn incremental_session() {
        let mut e = Engine::new(1_000_000);
        let out = run(
            &mut e,
            "(set-logic QF_LIA)(declare-fun x () Int)(assert (> x 2))(check-sat)",
        );
        assert_eq!(out, vec!["sat"]);
        let out = run(&mut e, "(push 1)(assert (< x 0))(check-sat)");
        assert_eq!(out, vec!["unsat"]);
        let out = run(&mut e, "(pop 1)(check-sat)");
        assert_eq!(out, vec!["sat"]);
    }

    #[test]
    fn check_sat_assuming_selectors() {
        let mut e = Engine::new(1_000_000);
        let out = run(
            &mut e,
            "(declare-fun x () Int)(declare-fun s0 () Bool)\
             (assert (or s0 (<= x 0)))(assert (not (<= x 5)))\
             (check-sat-assuming ((not s0)))",
        );
        assert_eq!(out, vec!["unsat"]);
        let out = run(&mut e, "(check-sat-assuming (s0))");
        assert_eq!(out, vec!["sat"]);
    }

    #[test]
    fn model_omits_unused_symbols() {
        let mut e = Engine::new(1_000_000);
        let out = run(
            &mut e,
            "(declare-fun x () Int)(declare-fun y () Int)\
             (assert (= x 4))(check-sat)(get-model)",
        );
        assert_eq!(out[0], "sat");
        let model = out[1..].join("\n");
        assert!(model.contains("(define-fun x () Int 4)"));
        assert!(!model.contains("define-fun y"), "y is a don't-care: {model}");
    }

    #[test]
    fn print_success_acknowledges_commands() {
        let mut e = Engine::new(1_000_000);
        let out = run(&mut e, "(set-option :print-success true)(set-logic QF_LIA)");
        assert_eq!(out, vec!["success", "success"]);
    }

    #[test]
    fn errors_are_reported_inline() {
        let mut e = Engine::new(1_000_000);
        let out = run(&mut e, "(assert (= x 1))");
        assert!(out[0].starts_with("(error"));
    }

    #[test]
    fn echo_round_trip() {
        let mut e = Engine::new(1_000_000);
        let out = run(&mut e, "(echo \"ready\")");
        assert_eq!(out, vec!["ready"]);
    }

    #[test]
    fn negative_model_values_use_minus_form() {
        let mut e = Engine::new(1_000_000);
        let out = run(
            &mut e,
            "(declare-fun x () Int)(assert (< x (- 3)))(check-sat)(get-value (x))",
        );
        assert_eq!(out[0], "sat");
        assert!(out[1].starts_with("((x (- "));
    }
}
