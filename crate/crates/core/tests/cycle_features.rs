mod common;

use common::cycles::enumerate_cycles;
use flowsteer::discrete::RandomStream;
use flowsteer::features::{cycle_graph_features, cycle_node_features, BinaryAdjacency};
use flowsteer::graph::{random_permutation, AttributedGraph};

fn check(adj: &BinaryAdjacency) {
    let n = adj.n();
    let oracle = enumerate_cycles(n, &|i, j| adj.get(i, j), 6);
    let nodes = cycle_node_features(adj).unwrap();
    assert_eq!(nodes.x3, oracle.per_node[3]);
    assert_eq!(nodes.x4, oracle.per_node[4]);
    assert_eq!(nodes.x5, oracle.per_node[5]);
    let g = cycle_graph_features(adj).unwrap();
    assert_eq!([g.y3, g.y4, g.y5, g.y6], [oracle.total[3], oracle.total[4], oracle.total[5], oracle.total[6]]);
}

#[test]
fn matches_enumeration_on_every_graph_up_to_five_nodes() {
    for n in 1..=5 {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &p)| p).collect();
            check(&BinaryAdjacency::from_edges(n, &edges).unwrap());
        }
    }
}

#[test]
fn matches_enumeration_on_random_graphs_up_to_seven_nodes() {
    let mut rng = RandomStream::new(17, 0);
    for trial in 0..1000 {
        let n = 6 + trial % 2;
        let density = 0.2 + 0.6 * rng.uniform();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.uniform() < density {
                    edges.push((i, j));
                }
            }
        }
        check(&BinaryAdjacency::from_edges(n, &edges).unwrap());
    }
}

#[test]
fn features_are_permutation_equivariant() {
    let mut rng = RandomStream::new(4, 4);
    for _ in 0..50 {
        let n = 7;
        let mut g = AttributedGraph::edgeless(vec![3; n]);
        for i in 0..n {
            for j in i + 1..n {
                if rng.uniform() < 0.5 {
                    g.set_edge(i, j, 1);
                }
            }
        }
        let perm = random_permutation(n, &mut rng);
        let a = cycle_node_features(&BinaryAdjacency::from_graph(&g)).unwrap();
        let b = cycle_node_features(&BinaryAdjacency::from_graph(&g.permuted(&perm))).unwrap();
        for v in 0..n {
            assert_eq!(a.x3[v], b.x3[perm[v]]);
            assert_eq!(a.x4[v], b.x4[perm[v]]);
            assert_eq!(a.x5[v], b.x5[perm[v]]);
        }
    }
}
