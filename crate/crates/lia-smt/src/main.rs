use lia_smt::sexpr::{parse_all, CommandReader};
use lia_smt::Engine;
use std::io::{BufRead, Write};

const DEFAULT_BUDGET: u64 = 10_000_000;

fn main() {
    let mut budget = DEFAULT_BUDGET;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--budget" => {
                budget = args
                    .next()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or_else(|| {
                        eprintln!("--budget takes a positive integer");
                        std::process::exit(2);
                    });
            }
            "--version" => {
                println!("lia-smt 0.1.0");
                return;
            }
            other => {
                eprintln!("unknown argument: {other}");
                std::process::exit(2);
            }
        }
    }

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut engine = Engine::new(budget);
    let mut reader = CommandReader::new();

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        for form in reader.feed(&(line + "\n")) {
            let replies = match parse_all(&form) {
                Ok(cmds) => cmds
                    .iter()
                    .flat_map(|c| engine.execute(c))
                    .collect::<Vec<_>>(),
                Err(e) => vec![format!("(error \"{e}\")")],
            };
            for r in replies {
                writeln!(out, "{r}").expect("stdout closed");
            }
            out.flush().expect("stdout closed");
            if engine.exited {
                return;
            }
        }
    }
}
