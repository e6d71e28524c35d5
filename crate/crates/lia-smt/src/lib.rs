//! A small incremental SMT solver for quantifier-free linear integer
//! arithmetic with booleans, speaking the SMT-LIB2 text protocol on
//! stdin/stdout. Complete for QF_LIA via the Omega test.

pub mod engine;
pub mod lia;
pub mod sexpr;
pub mod solve;
pub mod term;

pub use engine::Engine;
