#![allow(dead_code, clippy::needless_range_loop)]

use cdl_compass::graph::Dag;
use rand::seq::SliceRandom;
use rand::Rng;

/// Node names that sort in index order.
pub fn node_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

/// Dag over `V0..V{n-1}` from index edges; node index i is `V{i}`.
pub fn dag_from_indices(n: usize, edges: &[(usize, usize)]) -> Dag {
    let names = node_names(n);
    Dag::new(
        names.clone(),
        edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())),
    )
    .expect("acyclic by construction")
}

/// Every labeled DAG on `n` nodes as index edge lists.
pub fn all_dags(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            c /= 3;
        }
        if acyclic(n, &edges) {
            out.push(edges);
        }
    }
    out
}

fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    seen == n
}

/// Random DAG: shuffle a topological order, then keep each forward pair
/// with probability `p`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges
}

/// Reference d-separation: enumerate every simple path in the skeleton and
/// apply the blocking rules node by node.
pub fn dsep_by_paths(n: usize, edges: &[(usize, usize)], x: usize, y: usize, given: &[bool]) -> bool {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
    }
    // descendants including self
    let mut desc = vec![vec![false; n]; n];
    for (v, row) in desc.iter_mut().enumerate() {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if row[u] {
                continue;
            }
            row[u] = true;
            for w in 0..n {
                if adj[u][w] {
                    stack.push(w);
                }
            }
        }
    }
    let collider_open = |v: usize| (0..n).any(|d| desc[v][d] && given[d]);
    let mut path = vec![x];
    let mut on_path = vec![false; n];
    on_path[x] = true;
    !open_path_exists(n, &adj, y, given, &collider_open, &mut path, &mut on_path)
}

fn open_path_exists(
    n: usize,
    adj: &[Vec<bool>],
    target: usize,
    given: &[bool],
    collider_open: &dyn Fn(usize) -> bool,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
) -> bool {
    let last = *path.last().unwrap();
    for next in 0..n {
        if on_path[next] || !(adj[last][next] || adj[next][last]) {
            continue;
        }
        // `last` becomes an interior node once `next` is appended
        if path.len() >= 2 {
            let prev = path[path.len() - 2];
            let collider = adj[prev][last] && adj[next][last];
            let blocked = if collider { !collider_open(last) } else { given[last] };
            if blocked {
                continue;
            }
        }
        if next == target {
            return true;
        }
        path.push(next);
        on_path[next] = true;
        let found = open_path_exists(n, adj, target, given, collider_open, path, on_path);
        path.pop();
        on_path[next] = false;
        if found {
            return true;
        }
    }
    false
}
