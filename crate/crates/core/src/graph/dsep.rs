use std::collections::BTreeSet;

use super::{Dag, GraphError, IndependenceSet, IndependenceStatement, Variable};

/// Bayes-ball reachability: marks every node reachable from `source` along an
/// active trail given the conditioning mask.
pub(crate) fn reachable(
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
    source: usize,
    given: &[bool],
) -> Vec<bool> {
    let n = parents.len();

    // Nodes that are in the conditioning set or have a descendant in it.
    let mut anc = given.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| given[i]).collect();
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }

    // (node, arrived_from_child) pairs; "up" means travelling against an edge.
    let mut visited_up = vec![false; n];
    let mut visited_down = vec![false; n];
    let mut reached = vec![false; n];
    let mut queue = vec![(source, true)];
    while let Some((v, up)) = queue.pop() {
        let seen = if up { &mut visited_up[v] } else { &mut visited_down[v] };
        if *seen {
            continue;
        }
        *seen = true;
        if !given[v] {
            reached[v] = true;
        }
        if up {
            if !given[v] {
                queue.extend(parents[v].iter().map(|&p| (p, true)));
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
        } else {
            if !given[v] {
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
            if anc[v] {
                queue.extend(parents[v].iter().map(|&p| (p, true)));
            }
        }
    }
    reached
}

impl Dag {
    /// Whether `x` and `y` are d-separated by `given`.
    pub fn d_separated<S: AsRef<str>>(
        &self,
        x: &str,
        y: &str,
        given: &[S],
    ) -> Result<bool, GraphError> {
        let xi = self.require(x)?;
        let yi = self.require(y)?;
        if xi == yi {
            return Err(GraphError::SameEndpoints(x.to_string()));
        }
        let mut mask = vec![false; self.len()];
        for z in given {
            let zi = self.require(z.as_ref())?;
            if zi == xi || zi == yi {
                return Err(GraphError::EndpointConditioned(z.as_ref().to_string()));
            }
            mask[zi] = true;
        }
        Ok(self.d_separated_indexed(xi, yi, &mask))
    }

    /// Index-level d-separation query; `given` is a membership mask over
    /// [`Dag::nodes`]. Endpoints must be distinct and outside the mask.
    pub fn d_separated_indexed(&self, x: usize, y: usize, given: &[bool]) -> bool {
        debug_assert!(x != y && !given[x] && !given[y]);
        !reachable(self.parent_indices(), self.child_indices(), x, given)[y]
    }

    /// Every conditional (in)dependence statement the graph implies: for each
    /// unordered pair and each conditioning subset of the remaining nodes.
    pub fn implied_independencies(&self, cap: usize) -> Result<IndependenceSet, GraphError> {
        let n = self.len();
        if n > cap {
            return Err(GraphError::CapExceeded { nodes: n, cap });
        }
        let mut set = IndependenceSet::new();
        let mut mask = vec![false; n];
        for x in 0..n {
            for y in x + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for bits in 0u64..(1u64 << rest.len()) {
                    mask.iter_mut().for_each(|m| *m = false);
                    let mut given = BTreeSet::new();
                    for (k, &v) in rest.iter().enumerate() {
                        if bits >> k & 1 == 1 {
                            mask[v] = true;
                            given.insert(self.nodes()[v].clone());
                        }
                    }
                    let holds = self.d_separated_indexed(x, y, &mask);
                    set.insert(IndependenceStatement::new_unchecked(
                        self.nodes()[x].clone(),
                        self.nodes()[y].clone(),
                        given,
                        holds,
                    ))?;
                }
            }
        }
        Ok(set)
    }

    /// Evaluates one statement against the graph: true iff the graph's
    /// d-separation verdict matches the statement's `holds` flag.
    pub fn agrees_with(&self, s: &IndependenceStatement) -> Result<bool, GraphError> {
        let given: Vec<&Variable> = s.given().iter().collect();
        let given: Vec<&str> = given.iter().map(|v| v.as_str()).collect();
        Ok(self.d_separated(s.x().as_str(), s.y().as_str(), &given)? == s.holds())
    }
}
