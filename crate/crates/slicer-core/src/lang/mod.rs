//! Frontend for the mini imperative language: parsing and CFA lowering.

pub mod ast;
pub mod lower;
pub mod parser;

pub use ast::{BExpr, Expr, Program, SourceSpan, Stmt};
pub use lower::lower_to_cfa;
pub use parser::{parse_program, ParseError};
