use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dag::kahn_order;
use super::{Dag, GraphError, Variable};

/// A partially directed graph: directed edges plus undirected adjacencies.
///
/// Undirected pairs are stored with the smaller name first. A pair is never
/// both directed and undirected, and the directed part is acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PdagRepr", into = "PdagRepr")]
pub struct Pdag {
    nodes: BTreeSet<Variable>,
    directed: BTreeSet<(Variable, Variable)>,
    undirected: BTreeSet<(Variable, Variable)>,
}

#[derive(Serialize, Deserialize)]
struct PdagRepr {
    nodes: BTreeSet<Variable>,
    #[serde(default)]
    directed: BTreeSet<(Variable, Variable)>,
    #[serde(default)]
    undirected: BTreeSet<(Variable, Variable)>,
}

impl TryFrom<PdagRepr> for Pdag {
    type Error = GraphError;
    fn try_from(r: PdagRepr) -> Result<Self, Self::Error> {
        Pdag::new(r.nodes, r.directed, r.undirected)
    }
}

impl From<Pdag> for PdagRepr {
    fn from(p: Pdag) -> Self {
        PdagRepr {
            nodes: p.nodes,
            directed: p.directed,
            undirected: p.undirected,
        }
    }
}

impl Pdag {
    pub fn new(
        nodes: impl IntoIterator<Item = Variable>,
        directed: impl IntoIterator<Item = (Variable, Variable)>,
        undirected: impl IntoIterator<Item = (Variable, Variable)>,
    ) -> Result<Self, GraphError> {
        let mut nodes: BTreeSet<Variable> = nodes.into_iter().collect();
        let directed: BTreeSet<(Variable, Variable)> = directed.into_iter().collect();
        let mut und = BTreeSet::new();
        for (a, b) in undirected {
            und.insert(if a <= b { (a, b) } else { (b, a) });
        }
        for (a, b) in directed.iter().chain(und.iter()) {
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            nodes.insert(a.clone());
            nodes.insert(b.clone());
        }
        for (a, b) in &directed {
            let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if und.contains(&key) {
                return Err(GraphError::MixedEdge(key.0.to_string(), key.1.to_string()));
            }
        }
        let index: Vec<&Variable> = nodes.iter().collect();
        let pos = |v: &Variable| index.binary_search(&v).expect("endpoint registered");
        let mut children = vec![Vec::new(); index.len()];
        for (a, b) in &directed {
            children[pos(a)].push(pos(b));
        }
        if kahn_order(&children).is_none() {
            return Err(GraphError::Cycle);
        }
        Ok(Pdag {
            nodes,
            directed,
            undirected: und,
        })
    }

    pub fn from_dag(g: &Dag) -> Self {
        Pdag {
            nodes: g.nodes().iter().cloned().collect(),
            directed: g.edges().map(|(a, b)| (a.clone(), b.clone())).collect(),
            undirected: BTreeSet::new(),
        }
    }

    /// Summarises a set of DAGs sharing one skeleton: an adjacency is
    /// directed when every member orients it the same way and undirected
    /// otherwise. For a Markov equivalence class this is its CPDAG.
    pub fn from_dags(dags: &[Dag]) -> Result<Self, GraphError> {
        let Some(first) = dags.first() else {
            return Ok(Pdag {
                nodes: BTreeSet::new(),
                directed: BTreeSet::new(),
                undirected: BTreeSet::new(),
            });
        };
        let skeleton = |g: &Dag| -> BTreeSet<(Variable, Variable)> {
            g.edges()
                .map(|(a, b)| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) })
                .collect()
        };
        let base = skeleton(first);
        for g in &dags[1..] {
            if g.nodes() != first.nodes() || skeleton(g) != base {
                return Err(GraphError::SkeletonMismatch);
            }
        }
        let mut directed = BTreeSet::new();
        let mut undirected = BTreeSet::new();
        for (a, b) in base {
            let forward = dags.iter().all(|g| g.has_edge(a.as_str(), b.as_str()));
            let backward = dags.iter().all(|g| g.has_edge(b.as_str(), a.as_str()));
            if forward {
                directed.insert((a, b));
            } else if backward {
                directed.insert((b, a));
            } else {
                undirected.insert((a, b));
            }
        }
        Pdag::new(first.nodes().iter().cloned(), directed, undirected)
    }

    pub fn nodes(&self) -> &BTreeSet<Variable> {
        &self.nodes
    }

    pub fn directed(&self) -> &BTreeSet<(Variable, Variable)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(Variable, Variable)> {
        &self.undirected
    }

    /// The graph as a DAG when it has no undirected edges.
    pub fn to_dag(&self) -> Result<Dag, GraphError> {
        if !self.undirected.is_empty() {
            return Err(GraphError::NotDirected);
        }
        Dag::new(self.nodes.iter(), self.directed.iter().map(|(a, b)| (a, b)))
    }

    pub fn to_edge_list(&self) -> String {
        let touched: BTreeSet<&Variable> = self
            .directed
            .iter()
            .chain(self.undirected.iter())
            .flat_map(|(a, b)| [a, b])
            .collect();
        let mut out = String::new();
        for v in self.nodes.iter().filter(|v| !touched.contains(v)) {
            out.push_str(&format!("{v}\n"));
        }
        for (a, b) in &self.directed {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        for (a, b) in &self.undirected {
            out.push_str(&format!("{a} -- {b}\n"));
        }
        out
    }
}
