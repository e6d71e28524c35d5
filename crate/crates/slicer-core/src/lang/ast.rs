//! Abstract syntax of the mini imperative language.

use crate::formula::SrcCmp;
use std::collections::BTreeSet;
use std::fmt;

/// Source position: 1-based line and column plus character length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> SourceSpan {
        debug_assert!(line >= 1 && column >= 1);
        SourceSpan {
            line,
            column,
            length,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub statements: Vec<Stmt>,
    pub variables: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `int x, y;`
    Decl(Vec<String>),
    /// `x = e;`
    Assign(String, Expr),
    /// `x = nondet();`
    AssignNondet(String),
    Assume(BExpr),
    Assert(BExpr),
    If(BExpr, Vec<Stmt>, Vec<Stmt>),
    While(BExpr, Vec<Stmt>),
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BExpr {
    Cmp(Expr, SrcCmp, Expr),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Nondet,
}

impl Expr {
    /// Constant value of a literal-only expression, if it is one.
    pub fn const_value(&self) -> Option<i64> {
        match self {
            Expr::Int(n) => Some(*n),
            Expr::Var(_) => None,
            Expr::Neg(e) => e.const_value().map(|n| -n),
            Expr::Add(a, b) => Some(a.const_value()?.checked_add(b.const_value()?)?),
            Expr::Sub(a, b) => Some(a.const_value()?.checked_sub(b.const_value()?)?),
            Expr::Mul(a, b) => Some(a.const_value()?.checked_mul(b.const_value()?)?),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

fn cmp_str(op: SrcCmp) -> &'static str {
    match op {
        SrcCmp::Eq => "==",
        SrcCmp::Ne => "!=",
        SrcCmp::Lt => "<",
        SrcCmp::Le => "<=",
        SrcCmp::Gt => ">",
        SrcCmp::Ge => ">=",
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::Cmp(a, op, b) => write!(f, "{a} {} {b}", cmp_str(*op)),
            BExpr::Not(e) => write!(f, "!({e})"),
            BExpr::And(a, b) => write!(f, "({a}) && ({b})"),
            BExpr::Or(a, b) => write!(f, "({a}) || ({b})"),
            BExpr::Nondet => write!(f, "nondet()"),
        }
    }
}

impl Program {
    /// Canonical source rendering; parsing it back yields a structurally
    /// equal program.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        pretty_stmts(&self.statements, 0, &mut out);
        out
    }
}

fn pretty_stmts(stmts: &[Stmt], indent: usize, out: &mut String) {
    for s in stmts {
        pretty_stmt(s, indent, out);
    }
}

fn pretty_stmt(s: &Stmt, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match s {
        Stmt::Decl(names) => {
            out.push_str(&format!("{pad}int {};\n", names.join(", ")));
        }
        Stmt::Assign(x, e) => out.push_str(&format!("{pad}{x} = {e};\n")),
        Stmt::AssignNondet(x) => out.push_str(&format!("{pad}{x} = nondet();\n")),
        Stmt::Assume(c) => out.push_str(&format!("{pad}assume({c});\n")),
        Stmt::Assert(c) => out.push_str(&format!("{pad}assert({c});\n")),
        Stmt::If(c, then_branch, else_branch) => {
            out.push_str(&format!("{pad}if ({c}) {{\n"));
            pretty_stmts(then_branch, indent + 1, out);
            if else_branch.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
            } else {
                out.push_str(&format!("{pad}}} else {{\n"));
                pretty_stmts(else_branch, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
        Stmt::While(c, body) => {
            out.push_str(&format!("{pad}while ({c}) {{\n"));
            pretty_stmts(body, indent + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        Stmt::Skip => out.push_str(&format!("{pad}skip;\n")),
    }
}
