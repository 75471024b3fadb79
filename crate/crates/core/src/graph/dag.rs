use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::{GraphError, IntoVariable, Variable};

/// Checks whether `edges` over `nodes` admit a topological order.
///
/// Fails if an edge references a node that is not listed.
pub fn is_acyclic<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<bool, GraphError> {
    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_ref(), i))
        .collect();
    let mut children = vec![Vec::new(); nodes.len()];
    for (a, b) in edges {
        let ia = *index
            .get(a.as_ref())
            .ok_or_else(|| GraphError::UnknownVariable(a.as_ref().to_string()))?;
        let ib = *index
            .get(b.as_ref())
            .ok_or_else(|| GraphError::UnknownVariable(b.as_ref().to_string()))?;
        children[ia].push(ib);
    }
    Ok(kahn_order(&children).is_some())
}

/// Kahn's algorithm, always releasing the smallest ready index first.
pub(crate) fn kahn_order(children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = children.len();
    let mut indegree = vec![0usize; n];
    for cs in children {
        for &c in cs {
            indegree[c] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// A directed acyclic graph over named variables.
///
/// Nodes are kept sorted by name and edges sorted by `(parent, child)`, so two
/// graphs with the same node and edge sets compare equal regardless of the
/// order they were built in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    nodes: Vec<Variable>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    nodes: Vec<Variable>,
    edges: Vec<(Variable, Variable)>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = GraphError;
    fn try_from(r: DagRepr) -> Result<Self, Self::Error> {
        Dag::new(r.nodes, r.edges)
    }
}

impl From<Dag> for DagRepr {
    fn from(d: Dag) -> Self {
        DagRepr {
            edges: d.edges().map(|(a, b)| (a.clone(), b.clone())).collect(),
            nodes: d.nodes,
        }
    }
}

impl Dag {
    /// Builds a DAG from a node list and an edge list. Nodes appearing only in
    /// edges are added; duplicate nodes and edges collapse.
    pub fn new<N, E, A, B>(nodes: N, edges: E) -> Result<Self, GraphError>
    where
        N: IntoIterator,
        N::Item: IntoVariable,
        E: IntoIterator<Item = (A, B)>,
        A: IntoVariable,
        B: IntoVariable,
    {
        let mut node_set = BTreeSet::new();
        for n in nodes {
            node_set.insert(n.into_variable()?);
        }
        let mut edge_list = Vec::new();
        for (a, b) in edges {
            let (a, b) = (a.into_variable()?, b.into_variable()?);
            node_set.insert(a.clone());
            node_set.insert(b.clone());
            edge_list.push((a, b));
        }
        let nodes: Vec<Variable> = node_set.into_iter().collect();
        let index: BTreeMap<&Variable, usize> =
            nodes.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut idx_edges = BTreeSet::new();
        for (a, b) in &edge_list {
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            idx_edges.insert((index[a], index[b]));
        }
        Self::from_indexed(nodes, idx_edges.into_iter().collect())
    }

    /// Builds a DAG whose nodes are exactly the endpoints of `edges`.
    pub fn from_edges<E, A, B>(edges: E) -> Result<Self, GraphError>
    where
        E: IntoIterator<Item = (A, B)>,
        A: IntoVariable,
        B: IntoVariable,
    {
        Self::new(Vec::<Variable>::new(), edges)
    }

    pub fn empty() -> Self {
        Dag {
            nodes: Vec::new(),
            edges: Vec::new(),
            parents: Vec::new(),
            children: Vec::new(),
        }
    }

    /// `nodes` must be sorted and unique; `edges` sorted, unique and free of
    /// self-loops.
    pub(crate) fn from_indexed(
        nodes: Vec<Variable>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &edges {
            children[a].push(b);
            parents[b].push(a);
        }
        if kahn_order(&children).is_none() {
            return Err(GraphError::Cycle);
        }
        Ok(Dag {
            nodes,
            edges,
            parents,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Variable] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Variable, &Variable)> + '_ {
        self.edges
            .iter()
            .map(move |&(a, b)| (&self.nodes[a], &self.nodes[b]))
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index_of(parent), self.index_of(child)) {
            (Some(a), Some(b)) => self.edges.binary_search(&(a, b)).is_ok(),
            _ => false,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.binary_search_by(|v| v.as_str().cmp(name)).ok()
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownVariable(name.to_string()))
    }

    pub fn parents_of(&self, name: &str) -> Result<BTreeSet<&Variable>, GraphError> {
        let i = self.require(name)?;
        Ok(self.parents[i].iter().map(|&p| &self.nodes[p]).collect())
    }

    pub fn children_of(&self, name: &str) -> Result<BTreeSet<&Variable>, GraphError> {
        let i = self.require(name)?;
        Ok(self.children[i].iter().map(|&c| &self.nodes[c]).collect())
    }

    pub(crate) fn parent_indices(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub(crate) fn child_indices(&self) -> &[Vec<usize>] {
        &self.children
    }

    /// Deterministic topological order (ties broken by name).
    pub fn topological_order(&self) -> Vec<&Variable> {
        kahn_order(&self.children)
            .expect("Dag invariant: acyclic")
            .into_iter()
            .map(|i| &self.nodes[i])
            .collect()
    }

    /// Strict descendants of `name`.
    pub fn descendants_of(&self, name: &str) -> Result<BTreeSet<&Variable>, GraphError> {
        let i = self.require(name)?;
        let mut seen = vec![false; self.len()];
        let mut stack = self.children[i].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&self.children[v]);
            }
        }
        Ok(seen
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(j, _)| &self.nodes[j])
            .collect())
    }

    /// Edge list as owned name pairs, in sorted order.
    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    /// Renders the graph in the edge-list exchange format. Isolated nodes are
    /// listed on their own line so the node set round-trips.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let mut touched = vec![false; self.len()];
        for &(a, b) in &self.edges {
            touched[a] = true;
            touched[b] = true;
        }
        for (i, v) in self.nodes.iter().enumerate() {
            if !touched[i] {
                out.push_str(v.as_str());
                out.push('\n');
            }
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        out
    }
}

impl std::fmt::Display for Dag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.edges().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
