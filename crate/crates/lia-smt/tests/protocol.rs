//! End-to-end checks of the solver binary over its text protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

struct Solver {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Solver {
    fn spawn() -> Solver {
        let mut child = Command::new(env!("CARGO_BIN_EXE_lia-smt"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .expect("spawn lia-smt");
        let stdin = child.stdin.take().unwrap();
        let stdout = BufReader::new(child.stdout.take().unwrap());
        Solver {
            child,
            stdin,
            stdout,
        }
    }

    fn send(&mut self, cmd: &str) {
        writeln!(self.stdin, "{cmd}").unwrap();
        self.stdin.flush().unwrap();
    }

    fn read_line(&mut self) -> String {
        let mut line = String::new();
        self.stdout.read_line(&mut line).unwrap();
        line.trim().to_string()
    }

    /// Sends a command and reads one response line.
    fn query(&mut self, cmd: &str) -> String {
        self.send(cmd);
        self.read_line()
    }

    /// Reads a parenthesized block (e.g. a model), returning all lines.
    fn read_block(&mut self) -> String {
        let mut depth = 0i32;
        let mut out = String::new();
        loop {
            let mut line = String::new();
            self.stdout.read_line(&mut line).unwrap();
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            out.push_str(&line);
            if depth <= 0 {
                return out;
            }
        }
    }
}

impl Drop for Solver {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        let _ = self.child.wait();
    }
}

#[test]
fn handshake_and_basic_session() {
    let mut s = Solver::spawn();
    assert_eq!(s.query("(set-option :print-success true)"), "success");
    assert_eq!(s.query("(set-logic QF_LIA)"), "success");
    assert_eq!(s.query("(echo \"ready\")"), "ready");
    assert_eq!(s.query("(declare-fun x () Int)"), "success");
    assert_eq!(s.query("(assert (> x 2))"), "success");
    assert_eq!(s.query("(check-sat)"), "sat");
    s.send("(get-model)");
    let model = s.read_block();
    assert!(model.contains("define-fun x"), "{model}");
}

#[test]
fn incremental_push_pop_with_assumptions() {
    let mut s = Solver::spawn();
    s.send("(set-logic QF_LIA)");
    s.send("(declare-fun x () Int)");
    s.send("(declare-fun s0 () Bool)");
    s.send("(declare-fun s1 () Bool)");
    s.send("(push 1)");
    s.send("(assert (or s0 (= x 0)))");
    s.send("(assert (or s1 (>= x 5)))");
    assert_eq!(
        s.query("(check-sat-assuming ((not s0) (not s1)))"),
        "unsat"
    );
    assert_eq!(s.query("(check-sat-assuming ((not s0) s1))"), "sat");
    s.send("(pop 1)");
    assert_eq!(s.query("(check-sat)"), "sat");
}

#[test]
fn unsat_has_no_model() {
    let mut s = Solver::spawn();
    s.send("(declare-fun a () Bool)");
    s.send("(assert a)");
    s.send("(assert (not a))");
    assert_eq!(s.query("(check-sat)"), "unsat");
    let reply = s.query("(get-model)");
    assert!(reply.starts_with("(error"), "{reply}");
}

#[test]
fn malformed_input_reports_error_and_continues() {
    let mut s = Solver::spawn();
    let reply = s.query("(assert (= x 1))");
    assert!(reply.starts_with("(error"), "{reply}");
    assert_eq!(s.query("(check-sat)"), "sat");
}
