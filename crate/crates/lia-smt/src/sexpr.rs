//! S-expression reader and writer for the solver's text protocol.

use num_bigint::BigInt;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Sym(String),
    Num(BigInt),
    Str(String),
    List(Vec<Sexpr>),
}

impl Sexpr {
    pub fn sym(s: &str) -> Sexpr {
        Sexpr::Sym(s.to_string())
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Sexpr::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexpr::Sym(s) => write!(f, "{s}"),
            Sexpr::Num(n) => write!(f, "{n}"),
            Sexpr::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Sexpr::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ParseError {}

/// Parses all complete s-expressions in `input`.
pub fn parse_all(input: &str) -> Result<Vec<Sexpr>, ParseError> {
    let mut parser = Parser {
        chars: input.chars().collect(),
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        parser.skip_trivia();
        if parser.at_end() {
            return Ok(out);
        }
        out.push(parser.parse_expr()?);
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == ';' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn parse_expr(&mut self) -> Result<Sexpr, ParseError> {
        self.skip_trivia();
        match self.peek() {
            None => Err(ParseError("unexpected end of input".into())),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(ParseError("unclosed list".into())),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexpr::List(items));
                        }
                        Some(_) => items.push(self.parse_expr()?),
                    }
                }
            }
            Some(')') => Err(ParseError("unexpected ')'".into())),
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ParseError("unclosed string literal".into())),
                        Some('"') => {
                            // SMT-LIB escapes a quote by doubling it.
                            if self.peek() == Some('"') {
                                self.bump();
                                s.push('"');
                            } else {
                                return Ok(Sexpr::Str(s));
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
            }
            Some('|') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ParseError("unclosed quoted symbol".into())),
                        Some('|') => return Ok(Sexpr::Sym(s)),
                        Some(c) => s.push(c),
                    }
                }
            }
            Some(c) if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                Ok(Sexpr::Num(s.parse().expect("digits form an integer")))
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' || c == '"' {
                        break;
                    }
                    s.push(c);
                    self.pos += 1;
                }
                // Lenient extension: accept "-3" style numerals.
                if s.len() > 1 && s.starts_with('-') && s[1..].chars().all(|c| c.is_ascii_digit())
                {
                    return Ok(Sexpr::Num(s.parse().expect("sign and digits")));
                }
                Ok(Sexpr::Sym(s))
            }
        }
    }
}

/// Accumulates raw input and hands out complete top-level forms.
///
/// Used by the read-eval loop so that commands split across lines (or
/// several commands on one line) are framed correctly before parsing.
#[derive(Default)]
pub struct CommandReader {
    buf: String,
    depth: i32,
    in_string: bool,
    in_comment: bool,
    complete_upto: usize,
}

impl CommandReader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds a chunk of input; returns any complete top-level forms.
    pub fn feed(&mut self, chunk: &str) -> Vec<String> {
        for c in chunk.chars() {
            self.buf.push(c);
            if self.in_comment {
                if c == '\n' {
                    self.in_comment = false;
                }
                continue;
            }
            if self.in_string {
                if c == '"' {
                    self.in_string = false;
                }
                continue;
            }
            match c {
                '"' => self.in_string = true,
                ';' => self.in_comment = true,
                '(' => self.depth += 1,
                ')' => {
                    self.depth -= 1;
                    if self.depth <= 0 {
                        self.depth = 0;
                        self.complete_upto = self.buf.len();
                    }
                }
                _ => {}
            }
        }
        if self.complete_upto == 0 {
            return Vec::new();
        }
        let ready: String = self.buf.drain(..self.complete_upto).collect();
        self.complete_upto = 0;
        match parse_all(&ready) {
            Ok(forms) => forms.iter().map(|f| f.to_string()).collect(),
            // Defer malformed input to the engine, which reports the error.
            Err(_) => vec![ready],
        }
    }
}
