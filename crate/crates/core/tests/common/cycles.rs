//! Brute-force simple-cycle enumeration.

/// `per_node[k][v]` = number of simple k-cycles through `v`; `total[k]` = number of k-cycles.
pub struct CycleCounts {
    pub per_node: Vec<Vec<u64>>,
    pub total: Vec<u64>,
}

pub fn enumerate_cycles(n: usize, adj: &dyn Fn(usize, usize) -> bool, max_len: usize) -> CycleCounts {
    let mut per_node = vec![vec![0u64; n]; max_len + 1];
    let mut total = vec![0u64; max_len + 1];
    // each cycle is found from its smallest vertex, in both directions
    for start in 0..n {
        let mut path = vec![start];
        let mut on_path = vec![false; n];
        on_path[start] = true;
        extend(n, adj, max_len, start, &mut path, &mut on_path, &mut per_node, &mut total);
    }
    for k in 3..=max_len {
        total[k] /= 2;
        for v in 0..n {
            per_node[k][v] /= 2;
        }
    }
    CycleCounts { per_node, total }
}

#[allow(clippy::too_many_arguments)]
fn extend(
    n: usize,
    adj: &dyn Fn(usize, usize) -> bool,
    max_len: usize,
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    per_node: &mut [Vec<u64>],
    total: &mut [u64],
) {
    let last = *path.last().unwrap();
    if path.len() >= 3 && adj(last, start) {
        let k = path.len();
        total[k] += 1;
        for &v in path.iter() {
            per_node[k][v] += 1;
        }
    }
    if path.len() == max_len {
        return;
    }
    for next in start + 1..n {
        if !on_path[next] && adj(last, next) {
            on_path[next] = true;
            path.push(next);
            extend(n, adj, max_len, start, path, on_path, per_node, total);
            path.pop();
            on_path[next] = false;
        }
    }
}

/// Whether the closed-form features of `adj` equal brute-force enumeration.
pub fn features_match(adj: &flowsteer::features::BinaryAdjacency) -> bool {
    use flowsteer::features::{cycle_graph_features, cycle_node_features};
    let oracle = enumerate_cycles(adj.n(), &|i, j| adj.get(i, j), 6);
    let nodes = cycle_node_features(adj).unwrap();
    let g = cycle_graph_features(adj).unwrap();
    nodes.x3 == oracle.per_node[3]
        && nodes.x4 == oracle.per_node[4]
        && nodes.x5 == oracle.per_node[5]
        && [g.y3, g.y4, g.y5, g.y6] == [oracle.total[3], oracle.total[4], oracle.total[5], oracle.total[6]]
}
