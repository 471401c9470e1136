//! Attributed graphs, dummy padding, node permutation and the flat token
//! layout consumed by the flow engine.
//!
//! Labels are zero-based: node label 0 is the dummy atom and edge label 0 is
//! the absence of a bond. Edges live only in the upper triangle, so symmetry
//! holds by construction.

mod canon;

pub use canon::{canonical_form, isomorphic, MAX_CANONICAL_NODES};

use serde::{Deserialize, Serialize};

use crate::discrete::RandomStream;
use crate::error::{Error, Result};

pub const DUMMY: u8 = 0;
pub const NO_BOND: u8 = 0;

/// Position of edge `(i, j)`, `i < j`, in a row-major upper triangle over `n` nodes.
#[inline]
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[inline]
pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Node-labelled graph with a symmetric edge-label matrix and a no-bond diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttributedGraph {
    labels: Vec<u8>,
    edges: Vec<u8>,
}

impl AttributedGraph {
    /// Graph with the given node labels and no bonds.
    pub fn edgeless(labels: Vec<u8>) -> Self {
        let edges = vec![NO_BOND; edge_count(labels.len())];
        Self { labels, edges }
    }

    /// Builds from node labels and a row-major upper triangle of edge labels.
    pub fn from_parts(labels: Vec<u8>, upper: Vec<u8>) -> Result<Self> {
        let expected = edge_count(labels.len());
        if upper.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: upper.len() });
        }
        Ok(Self { labels, edges: upper })
    }

    /// Builds from node labels and `(i, j, label)` bond triples.
    pub fn from_bonds(labels: Vec<u8>, bonds: &[(usize, usize, u8)]) -> Result<Self> {
        let mut g = Self::edgeless(labels);
        for &(i, j, l) in bonds {
            if i == j || i >= g.n() || j >= g.n() {
                return Err(Error::InvalidGraph(format!("bad bond ({i}, {j})")));
            }
            g.set_edge(i, j, l);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn upper(&self) -> &[u8] {
        &self.edges
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn set_label(&mut self, i: usize, label: u8) {
        self.labels[i] = label;
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> u8 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.edges[edge_index(self.n(), i, j)],
            std::cmp::Ordering::Greater => self.edges[edge_index(self.n(), j, i)],
            std::cmp::Ordering::Equal => NO_BOND,
        }
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_edge(&mut self, i: usize, j: usize, label: u8) {
        assert!(i != j, "self-edges are fixed at no-bond");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let n = self.n();
        self.edges[edge_index(n, a, b)] = label;
    }

    /// Bonds `(i, j, label)` with `i < j` and `label != NO_BOND`, row-major.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, u8)> + '_ {
        let n = self.n();
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.edges.iter())
            .filter(|(_, &l)| l != NO_BOND)
            .map(|((i, j), &l)| (i, j, l))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| j != i && self.edge(i, j) != NO_BOND)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn bond_count(&self) -> usize {
        self.edges.iter().filter(|&&l| l != NO_BOND).count()
    }

    /// Relabels nodes: node `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n());
        let n = self.n();
        let mut labels = vec![DUMMY; n];
        for i in 0..n {
            labels[perm[i]] = self.labels[i];
        }
        let mut out = Self::edgeless(labels);
        for (i, j, l) in self.bonds() {
            out.set_edge(perm[i], perm[j], l);
        }
        out
    }

    /// Subgraph induced by `nodes`, in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let labels = nodes.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::edgeless(labels);
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate().skip(a + 1) {
                let l = self.edge(i, j);
                if l != NO_BOND {
                    out.set_edge(a, b, l);
                }
            }
        }
        out
    }

    /// Indices of nodes that are not isolated dummies.
    pub fn non_dummy_nodes(&self) -> Vec<usize> {
        let mut keep = vec![false; self.n()];
        for (i, k) in keep.iter_mut().enumerate() {
            *k = self.labels[i] != DUMMY;
        }
        for (i, j, _) in self.bonds() {
            keep[i] = true;
            keep[j] = true;
        }
        (0..self.n()).filter(|&i| keep[i]).collect()
    }

    /// Removes dummy nodes that carry no bonds.
    pub fn strip_dummies(&self) -> Self {
        self.induced(&self.non_dummy_nodes())
    }

    pub fn pad_with_dummies(&self, count: usize) -> Self {
        pad_with_dummies(self, count)
    }

    pub fn canonical_form(&self) -> Result<Vec<u8>> {
        canonical_form(self)
    }

    pub fn check_vocab(&self, node_vocab: usize, edge_vocab: usize) -> Result<()> {
        if let Some(l) = self.labels.iter().find(|&&l| l as usize >= node_vocab) {
            return Err(Error::InvalidGraph(format!("node label {l} outside vocabulary {node_vocab}")));
        }
        if let Some(l) = self.edges.iter().find(|&&l| l as usize >= edge_vocab) {
            return Err(Error::InvalidGraph(format!("edge label {l} outside vocabulary {edge_vocab}")));
        }
        Ok(())
    }

    pub fn flatten(&self, node_vocab: usize, edge_vocab: usize) -> Result<FlatState> {
        flatten(self, node_vocab, edge_vocab)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson::from(self)
    }
}

/// Appends `count` dummy nodes with no bonds.
pub fn pad_with_dummies(g: &AttributedGraph, count: usize) -> AttributedGraph {
    let n = g.n();
    let mut labels = g.labels.clone();
    labels.extend(std::iter::repeat(DUMMY).take(count));
    let mut out = AttributedGraph::edgeless(labels);
    for (i, j, l) in g.bonds() {
        out.set_edge(i, j, l);
    }
    debug_assert_eq!(out.n(), n + count);
    out
}

/// Uniformly random node permutation `perm`, node `i` moving to `perm[i]`.
pub fn random_permutation(n: usize, rng: &mut RandomStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        perm.swap(i, j);
    }
    perm
}

/// Applies a uniformly random relabelling and returns it, so that paired
/// graphs can be moved with the same map.
pub fn permute_nodes(g: &AttributedGraph, rng: &mut RandomStream) -> (AttributedGraph, Vec<usize>) {
    let perm = random_permutation(g.n(), rng);
    (g.permuted(&perm), perm)
}

/// Vocabulary sizes and node count of a flattened graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub nodes: usize,
    pub node_vocab: usize,
    pub edge_vocab: usize,
}

impl Layout {
    pub fn new(nodes: usize, node_vocab: usize, edge_vocab: usize) -> Self {
        Self { nodes, node_vocab, edge_vocab }
    }

    /// A plain token sequence: `len` positions over `vocab`, with single-token
    /// (hence frozen) edge dimensions.
    pub fn sequence(len: usize, vocab: usize) -> Self {
        Self { nodes: len, node_vocab: vocab, edge_vocab: 1 }
    }

    pub fn edge_dims(&self) -> usize {
        edge_count(self.nodes)
    }

    pub fn dims(&self) -> usize {
        self.nodes + self.edge_dims()
    }

    #[inline]
    pub fn is_node(&self, dim: usize) -> bool {
        dim < self.nodes
    }

    #[inline]
    pub fn vocab(&self, dim: usize) -> usize {
        if dim < self.nodes {
            self.node_vocab
        } else {
            self.edge_vocab
        }
    }

    #[inline]
    pub fn edge_dim(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.nodes + edge_index(self.nodes, a, b)
    }

    /// `(i, j)` pairs in flat order, one per edge dimension.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.nodes;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    /// Number of joint states, saturating at `u64::MAX`.
    pub fn state_space(&self) -> u64 {
        let mut total: u64 = 1;
        for d in 0..self.dims() {
            total = total.saturating_mul(self.vocab(d) as u64);
        }
        total
    }
}

/// Node tokens followed by upper-triangular edge tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlatState {
    #[serde(flatten)]
    layout: Layout,
    tokens: Vec<u8>,
}

impl FlatState {
    pub fn new(layout: Layout, tokens: Vec<u8>) -> Result<Self> {
        if tokens.len() != layout.dims() {
            return Err(Error::DimensionMismatch { expected: layout.dims(), got: tokens.len() });
        }
        for (d, &t) in tokens.iter().enumerate() {
            if t as usize >= layout.vocab(d) {
                return Err(Error::InvalidGraph(format!("token {t} at dimension {d} outside vocabulary")));
            }
        }
        Ok(Self { layout, tokens })
    }

    /// Sequence state with frozen edge dimensions.
    pub fn sequence(vocab: usize, tokens: &[u8]) -> Result<Self> {
        let layout = Layout::sequence(tokens.len(), vocab);
        let mut all = tokens.to_vec();
        all.resize(layout.dims(), 0);
        Self::new(layout, all)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dims(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[u8] {
        &self.tokens
    }

    pub fn tokens_mut(&mut self) -> &mut [u8] {
        &mut self.tokens
    }

    #[inline]
    pub fn token(&self, dim: usize) -> usize {
        self.tokens[dim] as usize
    }

    pub fn node_tokens(&self) -> &[u8] {
        &self.tokens[..self.layout.nodes]
    }

    pub fn edge_tokens(&self) -> &[u8] {
        &self.tokens[self.layout.nodes..]
    }

    /// Mixed-radix index of the joint state (dimension 0 least significant).
    pub fn state_index(&self) -> u64 {
        let mut idx: u64 = 0;
        for d in (0..self.dims()).rev() {
            idx = idx * self.layout.vocab(d) as u64 + self.tokens[d] as u64;
        }
        idx
    }

    /// Inverse of [`FlatState::state_index`].
    pub fn from_state_index(layout: Layout, mut idx: u64) -> Self {
        let mut tokens = Vec::with_capacity(layout.dims());
        for d in 0..layout.dims() {
            let v = layout.vocab(d) as u64;
            tokens.push((idx % v) as u8);
            idx /= v;
        }
        Self { layout, tokens }
    }

    pub fn unflatten(&self) -> AttributedGraph {
        unflatten(self).expect("a FlatState always has a consistent layout")
    }
}

pub fn flatten(g: &AttributedGraph, node_vocab: usize, edge_vocab: usize) -> Result<FlatState> {
    g.check_vocab(node_vocab, edge_vocab)?;
    let layout = Layout::new(g.n(), node_vocab, edge_vocab);
    let mut tokens = g.labels.clone();
    tokens.extend_from_slice(&g.edges);
    FlatState::new(layout, tokens)
}

pub fn unflatten(s: &FlatState) -> Result<AttributedGraph> {
    let n = s.layout.nodes;
    if s.tokens.len() != n + edge_count(n) {
        return Err(Error::DimensionMismatch { expected: n + edge_count(n), got: s.tokens.len() });
    }
    AttributedGraph::from_parts(s.tokens[..n].to_vec(), s.tokens[n..].to_vec())
}

/// Wire form: `{"n": .., "node_labels": [..], "edges": [[i, j, label], ..]}`
/// listing only `i < j` with a bond.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub n: usize,
    pub node_labels: Vec<u8>,
    pub edges: Vec<[usize; 3]>,
}

impl From<&AttributedGraph> for GraphJson {
    fn from(g: &AttributedGraph) -> Self {
        Self {
            n: g.n(),
            node_labels: g.labels.clone(),
            edges: g.bonds().map(|(i, j, l)| [i, j, l as usize]).collect(),
        }
    }
}

impl TryFrom<GraphJson> for AttributedGraph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        if j.node_labels.len() != j.n {
            return Err(Error::DimensionMismatch { expected: j.n, got: j.node_labels.len() });
        }
        let mut g = AttributedGraph::edgeless(j.node_labels);
        for [a, b, l] in j.edges {
            if a >= b || b >= j.n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) must satisfy i < j < n")));
            }
            if l == NO_BOND as usize || l > u8::MAX as usize {
                return Err(Error::InvalidGraph(format!("edge label {l} not allowed in the edge list")));
            }
            g.set_edge(a, b, l as u8);
        }
        Ok(g)
    }
}

impl Serialize for AttributedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for AttributedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = GraphJson::deserialize(d)?;
        AttributedGraph::try_from(j).map_err(serde::de::Error::custom)
    }
}
