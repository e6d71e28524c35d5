//! Recursive descent parser for the mini imperative language.

use super::ast::{BExpr, Expr, Program, SourceSpan, Stmt};
use crate::formula::SrcCmp;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at {span}: {message}")]
    Syntax { message: String, span: SourceSpan },
    #[error("use of undeclared identifier `{name}` at {span}")]
    Undeclared { name: String, span: SourceSpan },
    #[error("non-linear arithmetic term at {span}: multiplication needs a literal operand")]
    NonLinear { span: SourceSpan },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Undeclared { span, .. }
            | ParseError::NonLinear { span } => *span,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

const KEYWORDS: [&str; 8] = [
    "int", "if", "else", "while", "skip", "assume", "assert", "nondet",
];

fn lex(text: &str) -> PResult<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    while i < chars.len() {
        let c = chars[i];
        let span = SourceSpan::new(line, col, 1);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
            }
            c if c.is_whitespace() => {
                col += 1;
                i += 1;
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let len = (i - start) as u32;
                let span = SourceSpan::new(line, col, len);
                col += len;
                if let Some(kw) = KEYWORDS.iter().find(|k| **k == word) {
                    tokens.push(Token {
                        tok: Tok::Kw(kw),
                        span,
                    });
                } else if word.starts_with("__") {
                    return Err(ParseError::Syntax {
                        message: format!("identifier `{word}` uses the reserved `__` prefix"),
                        span,
                    });
                } else {
                    tokens.push(Token {
                        tok: Tok::Ident(word),
                        span,
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let len = (i - start) as u32;
                let span = SourceSpan::new(line, col, len);
                col += len;
                let value = text.parse().map_err(|_| ParseError::Syntax {
                    message: format!("integer literal `{text}` out of range"),
                    span,
                })?;
                tokens.push(Token {
                    tok: Tok::Int(value),
                    span,
                });
            }
            _ => {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let double = ["==", "!=", "<=", ">=", "&&", "||"]
                    .iter()
                    .find(|p| two.starts_with(**p));
                if let Some(p) = double {
                    tokens.push(Token {
                        tok: Tok::Punct(p),
                        span: SourceSpan::new(line, col, 2),
                    });
                    i += 2;
                    col += 2;
                } else {
                    let single = ["(", ")", "{", "}", ";", ",", "=", "<", ">", "!", "+", "-", "*"]
                        .iter()
                        .find(|p| p.chars().next() == Some(c));
                    match single {
                        Some(p) => {
                            tokens.push(Token {
                                tok: Tok::Punct(p),
                                span,
                            });
                            i += 1;
                            col += 1;
                        }
                        None => {
                            return Err(ParseError::Syntax {
                                message: format!("unexpected character `{c}`"),
                                span,
                            })
                        }
                    }
                }
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(line, col, 0),
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    declared: BTreeSet<String>,
}

/// Parses a full program; parsing is total over the grammar and rejects
/// undeclared identifiers and non-linear terms with a diagnostic.
pub fn parse_program(text: &str) -> PResult<Program> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        declared: BTreeSet::new(),
    };
    let statements = parser.parse_stmts_until_eof()?;
    Ok(Program {
        statements,
        variables: parser.declared,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            return true;
        }
        false
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("literal `{n}`"),
            Tok::Kw(k) => format!("keyword `{k}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        ParseError::Syntax {
            message: format!("expected {expected}, found {found}"),
            span: self.span(),
        }
    }

    fn parse_ident(&mut self) -> PResult<(String, SourceSpan)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok((name, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn parse_stmts_until_eof(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            out.push(self.parse_item()?);
        }
        Ok(out)
    }

    fn parse_item(&mut self) -> PResult<Stmt> {
        if *self.peek() == Tok::Kw("int") {
            self.bump();
            let mut names = Vec::new();
            loop {
                let (name, _) = self.parse_ident()?;
                self.declared.insert(name.clone());
                names.push(name);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(Stmt::Decl(names));
        }
        self.parse_stmt()
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::Kw("skip") => {
                self.bump();
                self.expect_punct(";")?;
                Ok(Stmt::Skip)
            }
            Tok::Kw("assume") => {
                self.bump();
                self.expect_punct("(")?;
                let c = self.parse_bexpr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(Stmt::Assume(c))
            }
            Tok::Kw("assert") => {
                self.bump();
                self.expect_punct("(")?;
                let c = self.parse_bexpr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(Stmt::Assert(c))
            }
            Tok::Kw("if") => {
                self.bump();
                self.expect_punct("(")?;
                let c = self.parse_bexpr()?;
                self.expect_punct(")")?;
                let then_branch = self.parse_block()?;
                let else_branch = if *self.peek() == Tok::Kw("else") {
                    self.bump();
                    self.parse_block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If(c, then_branch, else_branch))
            }
            Tok::Kw("while") => {
                self.bump();
                self.expect_punct("(")?;
                let c = self.parse_bexpr()?;
                self.expect_punct(")")?;
                let body = self.parse_block()?;
                Ok(Stmt::While(c, body))
            }
            Tok::Ident(_) => {
                let (name, _) = self.parse_ident()?;
                self.expect_punct("=")?;
                if *self.peek() == Tok::Kw("nondet") {
                    self.bump();
                    self.expect_punct("(")?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    self.declared.insert(name.clone());
                    return Ok(Stmt::AssignNondet(name));
                }
                let e = self.parse_expr()?;
                self.expect_punct(";")?;
                // The assignment itself declares its target, but only
                // after the right-hand side has been checked.
                self.declared.insert(name.clone());
                Ok(Stmt::Assign(name, e))
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn parse_block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            if self.eat_punct("+") {
                let rhs = self.parse_term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat_punct("-") {
                let rhs = self.parse_term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_term(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_factor()?;
        while *self.peek() == Tok::Punct("*") {
            let star_span = self.span();
            self.bump();
            let rhs = self.parse_factor()?;
            if lhs.const_value().is_none() && rhs.const_value().is_none() {
                return Err(ParseError::NonLinear { span: star_span });
            }
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Ident(name) => {
                let span = self.span();
                self.bump();
                if !self.declared.contains(&name) {
                    return Err(ParseError::Undeclared { name, span });
                }
                Ok(Expr::Var(name))
            }
            Tok::Punct("-") => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.parse_factor()?)))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn parse_bexpr(&mut self) -> PResult<BExpr> {
        let mut lhs = self.parse_band()?;
        while self.eat_punct("||") {
            let rhs = self.parse_band()?;
            lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_band(&mut self) -> PResult<BExpr> {
        let mut lhs = self.parse_bnot()?;
        while self.eat_punct("&&") {
            let rhs = self.parse_bnot()?;
            lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_bnot(&mut self) -> PResult<BExpr> {
        if *self.peek() == Tok::Punct("!") {
            self.bump();
            return Ok(BExpr::Not(Box::new(self.parse_bnot()?)));
        }
        self.parse_batom()
    }

    fn parse_batom(&mut self) -> PResult<BExpr> {
        if *self.peek() == Tok::Kw("nondet") {
            self.bump();
            self.expect_punct("(")?;
            self.expect_punct(")")?;
            return Ok(BExpr::Nondet);
        }
        if *self.peek() == Tok::Punct("(") {
            // Ambiguous: `(bexpr)` or a parenthesized arithmetic operand.
            let mark = self.pos;
            self.bump();
            if let Ok(inner) = self.parse_bexpr() {
                if self.eat_punct(")") && !self.at_cmp() {
                    return Ok(inner);
                }
            }
            self.pos = mark;
        }
        let lhs = self.parse_expr()?;
        let op = self.parse_cmp()?;
        let rhs = self.parse_expr()?;
        Ok(BExpr::Cmp(lhs, op, rhs))
    }

    fn at_cmp(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Punct("==")
                | Tok::Punct("!=")
                | Tok::Punct("<")
                | Tok::Punct("<=")
                | Tok::Punct(">")
                | Tok::Punct(">=")
        )
    }

    fn parse_cmp(&mut self) -> PResult<SrcCmp> {
        let op = match self.peek() {
            Tok::Punct("==") => SrcCmp::Eq,
            Tok::Punct("!=") => SrcCmp::Ne,
            Tok::Punct("<") => SrcCmp::Lt,
            Tok::Punct("<=") => SrcCmp::Le,
            Tok::Punct(">") => SrcCmp::Gt,
            Tok::Punct(">=") => SrcCmp::Ge,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.bump();
        Ok(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse_program("int x; x = 0;").unwrap();
        assert_eq!(p.statements.len(), 2);
        assert!(p.variables.contains("x"));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("x = ;").unwrap_err();
        assert_eq!(err.span().line, 1);
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn undeclared_identifier_rejected() {
        let err = parse_program("int x; x = y + 1;").unwrap_err();
        assert!(matches!(err, ParseError::Undeclared { ref name, .. } if name == "y"));
    }

    #[test]
    fn assignment_declares_after_rhs() {
        // x on the right-hand side of its own first assignment is a read
        // of an undeclared variable.
        assert!(parse_program("x = x + 1;").is_err());
        assert!(parse_program("x = 0; x = x + 1;").is_ok());
    }

    #[test]
    fn nonlinear_multiplication_rejected() {
        let err = parse_program("int x, y; x = x * y;").unwrap_err();
        assert!(matches!(err, ParseError::NonLinear { .. }));
        assert!(parse_program("int x; x = 2 * x;").is_ok());
        assert!(parse_program("int x; x = x * 3;").is_ok());
    }

    #[test]
    fn reserved_prefix_rejected() {
        assert!(parse_program("int __x;").is_err());
    }

    #[test]
    fn parenthesized_comparison_disambiguation() {
        let p = parse_program("int x, y; if ((x + 1) < y) { skip; }").unwrap();
        assert_eq!(p.statements.len(), 2);
        let p = parse_program("int x, y; if ((x < y) && (y < 3)) { skip; }").unwrap();
        assert_eq!(p.statements.len(), 2);
    }

    #[test]
    fn fig1_style_listing_parses() {
        let src = "
            int x, p, i;
            x = nondet();
            p = nondet();
            if (p != 0) { assume(x >= 0); } else { assume(x < 0); }
            i = 0;
            while (nondet()) {
                assert(p != 0 && x >= 0 || p == 0 && x < 0);
                x = 2 * x;
                i = i + 1;
            }
        ";
        let p = parse_program(src).unwrap();
        assert_eq!(p.variables.len(), 3);
        // one if, one while at top level
        let ifs = p
            .statements
            .iter()
            .filter(|s| matches!(s, Stmt::If(..)))
            .count();
        let whiles = p
            .statements
            .iter()
            .filter(|s| matches!(s, Stmt::While(..)))
            .count();
        assert_eq!((ifs, whiles), (1, 1));
    }

    #[test]
    fn pretty_print_round_trip() {
        let src = "
            int x, y;
            x = 0;
            y = nondet();
            while (x < 10 && !(y == 0)) {
                if (y > 0) { x = x + 1; } else { skip; }
            }
            assert(x <= 10);
        ";
        let p = parse_program(src).unwrap();
        let again = parse_program(&p.pretty()).unwrap();
        assert_eq!(p, again);
    }
}
