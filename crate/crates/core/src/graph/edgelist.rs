use std::collections::BTreeSet;

use super::{Dag, GraphError, Pdag, Variable};

/// Parsed contents of an edge-list file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub nodes: BTreeSet<Variable>,
    pub directed: Vec<(Variable, Variable)>,
    pub undirected: Vec<(Variable, Variable)>,
}

impl EdgeList {
    pub fn into_dag(self) -> Result<Dag, GraphError> {
        if !self.undirected.is_empty() {
            return Err(GraphError::NotDirected);
        }
        Dag::new(self.nodes, self.directed)
    }

    pub fn into_pdag(self) -> Result<Pdag, GraphError> {
        Pdag::new(self.nodes, self.directed, self.undirected)
    }
}

/// Parses the edge-list exchange format: one `parent -> child` or `a -- b`
/// per line, a bare name declares an isolated node, `#` starts a comment.
pub fn parse_edge_list(text: &str) -> Result<EdgeList, GraphError> {
    let mut out = EdgeList::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| GraphError::Parse {
            line: i + 1,
            message,
        };
        let name = |s: &str| Variable::new(s.trim()).map_err(|e| err(e.to_string()));
        if let Some((a, b)) = line.split_once("->") {
            let (a, b) = (name(a)?, name(b)?);
            out.nodes.insert(a.clone());
            out.nodes.insert(b.clone());
            out.directed.push((a, b));
        } else if let Some((a, b)) = line.split_once("--") {
            let (a, b) = (name(a)?, name(b)?);
            out.nodes.insert(a.clone());
            out.nodes.insert(b.clone());
            out.undirected.push((a, b));
        } else {
            out.nodes.insert(name(line)?);
        }
    }
    Ok(out)
}
