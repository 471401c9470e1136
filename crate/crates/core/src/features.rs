//! Cycle-count features from adjacency-matrix powers and connected components.

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NO_BOND};

pub const MAX_FEATURE_NODES: usize = 64;
const INTEGER_RESIDUAL: f64 = 1e-6;

/// Symmetric 0/1 adjacency with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryAdjacency {
    n: usize,
    a: Vec<i64>,
}

impl BinaryAdjacency {
    pub fn from_graph(g: &AttributedGraph) -> Self {
        let n = g.n();
        let mut a = vec![0; n * n];
        for (i, j, _) in g.bonds() {
            a[i * n + j] = 1;
            a[j * n + i] = 1;
        }
        Self { n, a }
    }

    /// From undirected `(i, j)` pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = vec![0; n * n];
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("bad edge ({i}, {j})")));
            }
            a[i * n + j] = 1;
            a[j * n + i] = 1;
        }
        Ok(Self { n, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.a[i * self.n + j] != 0
    }
}

/// Dense integer matrix, enough for powers of small adjacency matrices.
#[derive(Clone, Debug)]
struct Mat {
    n: usize,
    v: Vec<i64>,
}

impl Mat {
    fn mul(&self, o: &Mat) -> Mat {
        let n = self.n;
        let mut v = vec![0; n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.v[i * n + k];
                if x == 0 {
                    continue;
                }
                for j in 0..n {
                    v[i * n + j] += x * o.v[k * n + j];
                }
            }
        }
        Mat { n, v }
    }

    fn at(&self, i: usize, j: usize) -> i64 {
        self.v[i * self.n + j]
    }

    fn diag(&self) -> Vec<i64> {
        (0..self.n).map(|i| self.at(i, i)).collect()
    }

    fn trace(&self) -> i64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }
}

struct Powers {
    a: Mat,
    a2: Mat,
    a3: Mat,
    a4: Mat,
    a5: Mat,
    deg: Vec<i64>,
}

fn powers(adj: &BinaryAdjacency) -> Powers {
    let a = Mat { n: adj.n, v: adj.a.clone() };
    let a2 = a.mul(&a);
    let a3 = a2.mul(&a);
    let a4 = a3.mul(&a);
    let a5 = a4.mul(&a);
    let deg = a2.diag();
    Powers { a, a2, a3, a4, a5, deg }
}

/// Per-node counts of simple 3-, 4- and 5-cycles through each node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCycles {
    pub x3: Vec<u64>,
    pub x4: Vec<u64>,
    pub x5: Vec<u64>,
}

/// Graph-level counts of simple 3- to 6-cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphCycles {
    pub y3: u64,
    pub y4: u64,
    pub y5: u64,
    pub y6: u64,
}

/// Which closed-walk correction to use for five-cycles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FiveCycleFormula {
    /// Removes every degenerate closed 5-walk class; exact.
    #[default]
    Corrected,
    /// `(diag(A^5) - 2 diag(A^3)∘d - A diag(A^3) + diag(A^3)) / 2`. Miscounts
    /// whenever a triangle node has a neighbour off the triangle or sits in a
    /// dense clique (K4 gives 6 instead of 0). Kept for comparison only.
    Legacy,
}

pub fn cycle_node_features(adj: &BinaryAdjacency) -> Result<NodeCycles> {
    cycle_node_features_with(adj, FiveCycleFormula::Corrected)
}

pub fn cycle_node_features_with(adj: &BinaryAdjacency, five: FiveCycleFormula) -> Result<NodeCycles> {
    check_size(adj)?;
    let p = powers(adj);
    node_features(&p, five)
}

fn node_features(p: &Powers, five: FiveCycleFormula) -> Result<NodeCycles> {
    let n = p.a.n;
    let d3 = p.a3.diag();
    let d4 = p.a4.diag();
    let d5 = p.a5.diag();
    let mut x3 = Vec::with_capacity(n);
    let mut x4 = Vec::with_capacity(n);
    let mut x5 = Vec::with_capacity(n);
    for i in 0..n {
        x3.push(halve(d3[i])?);

        let a_d: i64 = (0..n).map(|x| p.a.at(i, x) * p.deg[x]).sum();
        x4.push(halve(d4[i] - p.deg[i] * (p.deg[i] - 1) - a_d)?);

        let a_d3: i64 = (0..n).map(|x| p.a.at(i, x) * d3[x]).sum();
        let raw = match five {
            FiveCycleFormula::Legacy => d5[i] - 2 * d3[i] * p.deg[i] - a_d3 + d3[i],
            FiveCycleFormula::Corrected => {
                // closed 5-walks at i that revisit a vertex: a triangle through i
                // with a back-and-forth step at i, a triangle hanging off a
                // neighbour, or a tail step from a triangle vertex (counted through
                // the (A^2)_{ix} paths), less the walks counted twice
                let tail: i64 = (0..n).map(|x| p.a.at(i, x) * p.a2.at(i, x) * p.deg[x]).sum();
                d5[i] - (2 * p.deg[i] * d3[i] + a_d3 + 2 * tail - 5 * d3[i])
            }
        };
        x5.push(halve(raw)?);
    }
    Ok(NodeCycles { x3, x4, x5 })
}

pub fn cycle_graph_features(adj: &BinaryAdjacency) -> Result<GraphCycles> {
    check_size(adj)?;
    let p = powers(adj);
    let nodes = node_features(&p, FiveCycleFormula::Corrected)?;
    let n = p.a.n;
    let y3 = divide(nodes.x3.iter().sum::<u64>() as i64, 3)?;
    let y4 = divide(nodes.x4.iter().sum::<u64>() as i64, 4)?;
    let y5 = divide(nodes.x5.iter().sum::<u64>() as i64, 5)?;

    let a6 = p.a5.mul(&p.a);
    let d2 = &p.deg;
    let d3 = p.a3.diag();
    let d4 = p.a4.diag();
    let mut s = a6.trace();
    s -= 3 * d3.iter().map(|x| x * x).sum::<i64>();
    let mut hadamard = 0;
    let mut a3_sum = 0;
    for i in 0..n {
        for j in 0..n {
            let a2ij = p.a2.at(i, j);
            hadamard += p.a.at(i, j) * a2ij * a2ij;
            a3_sum += p.a3.at(i, j);
        }
    }
    s += 9 * hadamard;
    s -= 6 * (0..n).map(|i| d2[i] * d4[i]).sum::<i64>();
    s += 6 * p.a4.trace();
    s -= 4 * p.a3.trace();
    s += 4 * d2.iter().map(|d| d * d * d).sum::<i64>();
    s += 3 * a3_sum;
    s -= 12 * d2.iter().map(|d| d * d).sum::<i64>();
    s += 4 * d2.iter().sum::<i64>();
    let y6 = divide(s, 12)?;
    Ok(GraphCycles { y3, y4, y5, y6 })
}

fn check_size(adj: &BinaryAdjacency) -> Result<()> {
    if adj.n > MAX_FEATURE_NODES {
        return Err(Error::GraphTooLarge { nodes: adj.n, max: MAX_FEATURE_NODES });
    }
    Ok(())
}

fn halve(x: i64) -> Result<u64> {
    divide(x, 2)
}

/// Exact division into a non-negative integer, via the same near-integer
/// rounding a floating evaluation would need.
fn divide(x: i64, by: i64) -> Result<u64> {
    let q = x as f64 / by as f64;
    let r = q.round();
    if (q - r).abs() >= INTEGER_RESIDUAL || r < 0.0 {
        return Err(Error::InvalidGraph(format!("cycle count {q} is not a non-negative integer")));
    }
    Ok(r as u64)
}

/// Component count and per-node component ids numbered in first-seen order.
pub fn connected_components(g: &AttributedGraph) -> (usize, Vec<usize>) {
    let n = g.n();
    let mut uf = UnionFind::new(n);
    for (i, j, l) in g.bonds() {
        if l != NO_BOND {
            uf.union(i, j);
        }
    }
    let mut id_of_root = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    let mut count = 0;
    for (v, label) in labels.iter_mut().enumerate() {
        let r = uf.find(v);
        if id_of_root[r] == usize::MAX {
            id_of_root[r] = count;
            count += 1;
        }
        *label = id_of_root[r];
    }
    (count, labels)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
