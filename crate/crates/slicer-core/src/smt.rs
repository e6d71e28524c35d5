//! Client for an external SMT solver process speaking the standard text
//! protocol: incremental assertions, check with assumptions, model
//! extraction, per-session statistics and optional transcript logging.

use crate::formula::{eval_tri, Formula, Tri, Value, VarName};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("failed to spawn solver `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("solver handshake failed: {0}")]
    Handshake(String),
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("solver process died")]
    Died,
    #[error("solver i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type SolverResult<T> = Result<T, SolverError>;

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub command: Vec<String>,
    pub timeout_ms: u64,
    pub transcript_dir: Option<PathBuf>,
}

impl SolverSettings {
    pub fn new(command: Vec<String>) -> SolverSettings {
        SolverSettings {
            command,
            timeout_ms: 60_000,
            transcript_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub checks: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub wall_micros: u64,
}

/// A total-enough assignment extracted from the solver; variables the
/// solver omitted are genuine don't-cares and stay absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub assignment: BTreeMap<VarName, Value>,
}

impl Model {
    pub fn get(&self, v: &VarName) -> Option<&Value> {
        self.assignment.get(v)
    }

    /// Three-valued evaluation under this model; `Unknown` marks a
    /// don't-care (some needed variable is absent).
    pub fn eval(&self, f: &Formula) -> Tri {
        eval_tri(f, &self.assignment)
    }

    /// Strict evaluation; absent variables are an error signal.
    pub fn eval_bool(&self, f: &Formula) -> SolverResult<bool> {
        match self.eval(f) {
            Tri::True => Ok(true),
            Tri::False => Ok(false),
            Tri::Unknown => Err(SolverError::Protocol(
                "evaluation undetermined: variable absent from model".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Sat(Model),
    Unsat,
    Unknown,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Solver command resolution: the `SLICER_SOLVER` environment variable
/// (whitespace-split), else a `lia-smt` binary next to the current
/// executable (or one directory up, for test binaries in `deps/`).
pub fn default_solver_command() -> Option<Vec<String>> {
    if let Ok(cmd) = std::env::var("SLICER_SOLVER") {
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if !parts.is_empty() {
            return Some(parts);
        }
    }
    let exe = std::env::current_exe().ok()?;
    let name = format!("lia-smt{}", std::env::consts::EXE_SUFFIX);
    for dir in [exe.parent(), exe.parent().and_then(|p| p.parent())] {
        if let Some(candidate) = dir.map(|d| d.join(&name)) {
            if candidate.is_file() {
                return Some(vec![candidate.to_string_lossy().into_owned()]);
            }
        }
    }
    None
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

pub struct SolverSession {
    settings: SolverSettings,
    connection: Option<Connection>,
    /// Declared symbols per assertion level, for scope-correct redeclares.
    declared: Vec<BTreeSet<VarName>>,
    /// Asserted formulas per level, kept for model replay checks.
    asserted: Vec<Vec<Formula>>,
    stats: SolverStats,
    transcript: Option<std::fs::File>,
}

impl SolverSession {
    /// Spawns the solver and performs the handshake. The session speaks
    /// quantifier-free linear integer arithmetic.
    pub fn start(settings: SolverSettings) -> SolverResult<SolverSession> {
        let mut session = SolverSession {
            settings,
            connection: None,
            declared: vec![BTreeSet::new()],
            asserted: vec![Vec::new()],
            stats: SolverStats::default(),
            transcript: None,
        };
        session.spawn()?;
        Ok(session)
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    fn spawn(&mut self) -> SolverResult<()> {
        let command = &self.settings.command;
        if command.is_empty() {
            return Err(SolverError::Handshake("empty solver command".into()));
        }
        if let Some(dir) = &self.settings.transcript_dir {
            std::fs::create_dir_all(dir)?;
            let id = SESSION_COUNTER.fetch_add(1, Ordering::SeqCst);
            let path = dir.join(format!("session-{id:04}.smt2"));
            self.transcript = Some(std::fs::File::create(path)?);
        }
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                command: command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            use std::io::BufRead;
            let reader = std::io::BufReader::new(stdout);
            for line in reader.lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            return;
                        }
                    }
                    Err(_) => return,
                }
            }
        });
        self.connection = Some(Connection {
            child,
            stdin,
            lines: rx,
        });
        self.declared = vec![BTreeSet::new()];
        self.asserted = vec![Vec::new()];

        self.command_expect_success("(set-option :print-success true)")
            .map_err(|e| SolverError::Handshake(e.to_string()))?;
        self.command_expect_success("(set-option :produce-models true)")
            .map_err(|e| SolverError::Handshake(e.to_string()))?;
        self.command_expect_success("(set-logic QF_LIA)")
            .map_err(|e| SolverError::Handshake(e.to_string()))?;
        Ok(())
    }

    fn respawn_if_dead(&mut self) -> SolverResult<()> {
        if self.connection.is_none() {
            self.spawn()?;
        }
        Ok(())
    }

    fn kill(&mut self) {
        if let Some(mut c) = self.connection.take() {
            let _ = c.child.kill();
            let _ = c.child.wait();
        }
    }

    fn send(&mut self, line: &str) -> SolverResult<()> {
        if let Some(t) = &mut self.transcript {
            let _ = writeln!(t, "{line}");
        }
        let result = {
            let conn = self.connection.as_mut().ok_or(SolverError::Died)?;
            writeln!(conn.stdin, "{line}").and_then(|_| conn.stdin.flush())
        };
        if result.is_err() {
            self.kill();
            return Err(SolverError::Died);
        }
        Ok(())
    }

    fn recv_line(&mut self) -> SolverResult<String> {
        let timeout = Duration::from_millis(self.settings.timeout_ms);
        let conn = self.connection.as_mut().ok_or(SolverError::Died)?;
        match conn.lines.recv_timeout(timeout) {
            Ok(line) => {
                if let Some(t) = &mut self.transcript {
                    let _ = writeln!(t, "; < {line}");
                }
                Ok(line)
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(SolverError::Protocol("query timeout".into()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill();
                Err(SolverError::Died)
            }
        }
    }

    fn command_expect_success(&mut self, cmd: &str) -> SolverResult<()> {
        self.send(cmd)?;
        let reply = self.recv_line()?;
        if reply.trim() == "success" {
            Ok(())
        } else {
            Err(SolverError::Protocol(format!(
                "expected success for {cmd}, got: {reply}"
            )))
        }
    }

    fn is_declared(&self, v: &VarName) -> bool {
        self.declared.iter().any(|level| level.contains(v))
    }

    /// Declares a boolean symbol (selector variables).
    pub fn declare_bool(&mut self, v: &VarName) -> SolverResult<()> {
        self.respawn_if_dead()?;
        if self.is_declared(v) {
            return Ok(());
        }
        self.command_expect_success(&format!("(declare-fun {} () Bool)", v.smt_name()))?;
        self.declared
            .last_mut()
            .expect("base level")
            .insert(v.clone());
        Ok(())
    }

    fn declare_ints_of(&mut self, f: &Formula) -> SolverResult<()> {
        for v in f.free_vars() {
            if !self.is_declared(&v) {
                self.command_expect_success(&format!("(declare-fun {} () Int)", v.smt_name()))?;
                self.declared
                    .last_mut()
                    .expect("base level")
                    .insert(v);
            }
        }
        Ok(())
    }

    /// Conjoins a quantifier-free formula to the current assertion set;
    /// integer symbols are declared on first use.
    pub fn assert_formula(&mut self, f: &Formula) -> SolverResult<()> {
        debug_assert!(f.is_quantifier_free());
        self.respawn_if_dead()?;
        self.declare_ints_of(f)?;
        self.command_expect_success(&format!("(assert {f})"))?;
        self.asserted.last_mut().expect("base level").push(f.clone());
        Ok(())
    }

    pub fn push(&mut self) -> SolverResult<()> {
        self.respawn_if_dead()?;
        self.command_expect_success("(push 1)")?;
        self.declared.push(BTreeSet::new());
        self.asserted.push(Vec::new());
        Ok(())
    }

    pub fn pop(&mut self) -> SolverResult<()> {
        if self.connection.is_none() {
            // The session died inside this scope; a fresh spawn is
            // equivalent to popping it.
            self.spawn()?;
            return Ok(());
        }
        self.command_expect_success("(pop 1)")?;
        if self.declared.len() > 1 {
            self.declared.pop();
            self.asserted.pop();
        }
        Ok(())
    }

    pub fn check(&mut self) -> SolverResult<CheckResult> {
        self.check_with_assumptions(&[])
    }

    /// Checks satisfiability under selector assumptions. `Sat` carries a
    /// model restricted to what the solver considered relevant; a replay
    /// check guards against protocol desync. Timeouts report `Unknown`.
    pub fn check_with_assumptions(
        &mut self,
        assumptions: &[(VarName, bool)],
    ) -> SolverResult<CheckResult> {
        self.respawn_if_dead()?;
        let started = Instant::now();
        let rendered: Vec<String> = assumptions
            .iter()
            .map(|(v, positive)| {
                if *positive {
                    v.smt_name()
                } else {
                    format!("(not {})", v.smt_name())
                }
            })
            .collect();
        let cmd = if rendered.is_empty() {
            "(check-sat)".to_string()
        } else {
            format!("(check-sat-assuming ({}))", rendered.join(" "))
        };
        self.send(&cmd)?;
        let outcome = match self.recv_line() {
            Ok(line) => match line.trim() {
                "sat" => {
                    let model = self.read_model()?;
                    self.replay(&model)?;
                    CheckResult::Sat(model)
                }
                "unsat" => CheckResult::Unsat,
                "unknown" => CheckResult::Unknown,
                other => {
                    return Err(SolverError::Protocol(format!(
                        "unexpected check-sat reply: {other}"
                    )))
                }
            },
            // A timed-out query degrades to unknown; the process was
            // killed and respawns on next use.
            Err(SolverError::Protocol(msg)) if msg.contains("timeout") => CheckResult::Unknown,
            Err(e) => return Err(e),
        };
        self.stats.checks += 1;
        match &outcome {
            CheckResult::Sat(_) => self.stats.sat += 1,
            CheckResult::Unsat => self.stats.unsat += 1,
            CheckResult::Unknown => self.stats.unknown += 1,
        }
        self.stats.wall_micros += started.elapsed().as_micros() as u64;
        Ok(outcome)
    }

    fn read_model(&mut self) -> SolverResult<Model> {
        self.send("(get-model)")?;
        let mut text = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = self.recv_line()?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if depth <= 0 && text.trim_start().starts_with('(') {
                break;
            }
        }
        if text.trim_start().starts_with("(error") {
            return Err(SolverError::Protocol(format!("get-model failed: {text}")));
        }
        parse_model(&text)
    }

    /// Every satisfiable query's model must determine the asserted
    /// formulas true; anything else indicates protocol desync.
    fn replay(&mut self, model: &Model) -> SolverResult<()> {
        for frame in &self.asserted {
            for f in frame {
                if model.eval(f) != Tri::True {
                    return Err(SolverError::Protocol(format!(
                        "model replay failed for assertion {f}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        if let Some(mut c) = self.connection.take() {
            let _ = c.child.wait();
        }
    }
}

/// Parses `(define-fun name () Sort value)` entries out of a model
/// s-expression, accepting both the bare-list and `(model ...)` shapes.
fn parse_model(text: &str) -> SolverResult<Model> {
    let tokens = tokenize(text);
    let mut pos = 0usize;
    let root = parse_sexpr(&tokens, &mut pos)
        .ok_or_else(|| SolverError::Protocol(format!("unparseable model: {text}")))?;
    let Sx::List(items) = root else {
        return Err(SolverError::Protocol(format!("unexpected model: {text}")));
    };
    let entries = match items.first() {
        Some(Sx::Atom(head)) if head == "model" => &items[1..],
        _ => &items[..],
    };
    let mut assignment = BTreeMap::new();
    for entry in entries {
        let Sx::List(parts) = entry else { continue };
        if parts.len() < 5 {
            continue;
        }
        let (Sx::Atom(kind), Sx::Atom(name), Sx::Atom(sort)) = (&parts[0], &parts[1], &parts[3])
        else {
            continue;
        };
        if kind != "define-fun" {
            continue;
        }
        let var = VarName::from_smt_name(name);
        let value = &parts[4];
        let value = match sort.as_str() {
            "Bool" => match value {
                Sx::Atom(b) if b == "true" => Value::Bool(true),
                Sx::Atom(b) if b == "false" => Value::Bool(false),
                _ => continue,
            },
            "Int" => match parse_int(value) {
                Some(n) => Value::Int(n),
                None => continue,
            },
            _ => continue,
        };
        assignment.insert(var, value);
    }
    Ok(Model { assignment })
}

#[derive(Debug)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            _ => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexpr(tokens: &[String], pos: &mut usize) -> Option<Sx> {
    let t = tokens.get(*pos)?;
    *pos += 1;
    if t == "(" {
        let mut items = Vec::new();
        loop {
            if tokens.get(*pos)? == ")" {
                *pos += 1;
                return Some(Sx::List(items));
            }
            items.push(parse_sexpr(tokens, pos)?);
        }
    } else if t == ")" {
        None
    } else {
        Some(Sx::Atom(t.clone()))
    }
}

fn parse_int(v: &Sx) -> Option<BigInt> {
    match v {
        Sx::Atom(a) => a.parse().ok(),
        Sx::List(items) => match items.as_slice() {
            [Sx::Atom(minus), inner] if minus == "-" => parse_int(inner).map(|n| -n),
            _ => None,
        },
    }
}
