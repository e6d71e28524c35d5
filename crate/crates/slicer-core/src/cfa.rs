//! Control-flow automaton: program locations connected by edges labelled
//! with transition formulas over current and next-state variables.

use crate::formula::Formula;
use std::collections::BTreeSet;
use std::fmt;

pub type NodeId = u32;

/// An edge's transition formula over `X` and `X'` (plus transient bound
/// intermediates until quantifier elimination runs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub formula: Formula,
}

impl Transition {
    pub fn new(formula: Formula) -> Transition {
        Transition { formula }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.formula)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub transition: Transition,
}

#[derive(Debug, Clone)]
pub struct Cfa {
    pub nodes: BTreeSet<NodeId>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub variables: BTreeSet<String>,
    pub error_node: Option<NodeId>,
}

impl Cfa {
    pub fn outgoing(&self, n: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.src == n)
    }

    pub fn incoming(&self, n: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.dst == n)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Text digraph dump: one `src -> dst : formula` line per edge.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!("{} -> {} : {}\n", e.src, e.dst, e.transition));
        }
        out
    }
}
