use std::collections::BTreeSet;

use super::dsep::reachable;
use super::{Dag, GraphError, IndependenceSet, IntoVariable, Variable};

/// Default node cap for [`enumerate_mec`]; 6 nodes is 3^15 candidate
/// orientations.
pub const DEFAULT_MEC_CAP: usize = 6;

struct IndexedConstraint {
    x: usize,
    y: usize,
    given: Vec<bool>,
    holds: bool,
}

fn index_constraints(
    nodes: &[Variable],
    constraints: &IndependenceSet,
) -> Result<Vec<IndexedConstraint>, GraphError> {
    let pos = |v: &Variable| {
        nodes
            .binary_search(v)
            .map_err(|_| GraphError::UnknownVariable(v.to_string()))
    };
    constraints
        .statements()
        .map(|s| {
            let mut given = vec![false; nodes.len()];
            for z in s.given() {
                given[pos(z)?] = true;
            }
            Ok(IndexedConstraint {
                x: pos(s.x())?,
                y: pos(s.y())?,
                given,
                holds: s.holds(),
            })
        })
        .collect()
}

/// All labeled DAGs over `vars` whose d-separation verdicts agree with every
/// statement in `constraints`, in lexicographic order of their edge lists.
///
/// This is exact brute force over `3^(n(n-1)/2)` orientations, so `vars` is
/// limited to `cap` nodes.
pub fn enumerate_mec<V: IntoVariable>(
    vars: impl IntoIterator<Item = V>,
    constraints: &IndependenceSet,
    cap: usize,
) -> Result<Vec<Dag>, GraphError> {
    let nodes: Vec<Variable> = vars
        .into_iter()
        .map(IntoVariable::into_variable)
        .collect::<Result<BTreeSet<_>, _>>()?
        .into_iter()
        .collect();
    let n = nodes.len();
    if n > cap {
        return Err(GraphError::CapExceeded { nodes: n, cap });
    }
    let indexed = index_constraints(&nodes, constraints)?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let total = 3u64.pow(pairs.len() as u32);

    let mut found = Vec::new();
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    let mut edges = Vec::with_capacity(pairs.len());
    for code in 0..total {
        edges.clear();
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            c /= 3;
        }
        if !acyclic_masks(n, &edges) {
            continue;
        }
        for v in 0..n {
            parents[v].clear();
            children[v].clear();
        }
        for &(a, b) in &edges {
            children[a].push(b);
            parents[b].push(a);
        }
        let ok = indexed.iter().all(|k| {
            let separated = !reachable(&parents, &children, k.x, &k.given)[k.y];
            separated == k.holds
        });
        if ok {
            let mut sorted = edges.clone();
            sorted.sort_unstable();
            found.push(sorted);
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|e| Dag::from_indexed(nodes.clone(), e))
        .collect()
}

fn acyclic_masks(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent_mask = vec![0u64; n];
    for &(a, b) in edges {
        parent_mask[b] |= 1 << a;
    }
    let mut remaining: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    loop {
        if remaining == 0 {
            return true;
        }
        let sources: u64 = (0..n)
            .filter(|&v| remaining >> v & 1 == 1 && parent_mask[v] & remaining == 0)
            .fold(0, |m, v| m | 1 << v);
        if sources == 0 {
            return false;
        }
        remaining &= !sources;
    }
}

/// Whether the graph's implied independencies agree with every constraint.
pub fn consistent_with(g: &Dag, constraints: &IndependenceSet) -> Result<bool, GraphError> {
    for s in constraints.statements() {
        if !g.agrees_with(&s)? {
            return Ok(false);
        }
    }
    Ok(true)
}
