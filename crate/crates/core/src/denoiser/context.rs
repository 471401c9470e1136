//! Feature keys for the tabular denoiser. Every dimension of a state maps to
//! a few 64-bit keys; each key owns one logit row and a dimension's logits
//! are the sum of its rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FlatState, Layout, NO_BOND};

pub(crate) const MAX_KEYS: usize = 3;

/// How states are turned into feature keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Featurizer {
    /// Keys on (time bucket, dimension index, own token), the same plus pooled
    /// token counts, and the whole joint state when the state space has at
    /// most `full_state_limit` elements.
    Positional { full_state_limit: u64 },
    /// Index-free keys built from local structure relative to a conditioning
    /// source graph (and product graph), so one table serves graphs of any
    /// size and node order.
    Graph,
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer::Positional { full_state_limit: 4096 }
    }
}

/// Conditioning graphs for the graph featurizer: the flow's source state and
/// the product it was derived from (identical for product-sourced flows).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphContext {
    pub source: FlatState,
    pub product: FlatState,
}

impl GraphContext {
    pub fn new(source: FlatState, product: FlatState) -> Result<Self> {
        if source.layout() != product.layout() {
            return Err(Error::DimensionMismatch { expected: source.dims(), got: product.dims() });
        }
        Ok(Self { source, product })
    }

    pub fn product_sourced(source: FlatState) -> Self {
        Self { product: source.clone(), source }
    }
}

#[inline]
fn fold(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
    }
    h
}

pub(crate) fn time_bucket(t: f64, buckets: usize) -> usize {
    ((t * buckets as f64).floor() as usize).min(buckets - 1)
}

/// Per-state precomputation shared by all dimensions.
pub(crate) enum Prepared<'a> {
    Positional {
        x: &'a FlatState,
        bucket: u64,
        pooled: u64,
        state: Option<u64>,
    },
    Graph {
        x: &'a FlatState,
        ctx: &'a GraphContext,
        bucket: u64,
        node: Vec<NodeInfo>,
        global: u64,
        pairs: Vec<(u16, u16)>,
    },
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct NodeInfo {
    /// Labels, bond-change counts, product-only bonds and source degree.
    desc: u64,
    /// Bitmask of current labels of newly bonded neighbours.
    gained_labels: u64,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(
        featurizer: Featurizer,
        x: &'a FlatState,
        t: f64,
        buckets: usize,
        ctx: Option<&'a GraphContext>,
    ) -> Result<Self> {
        let bucket = time_bucket(t, buckets) as u64;
        match featurizer {
            Featurizer::Positional { full_state_limit } => {
                let layout = x.layout();
                let mut node_counts = vec![0u64; layout.node_vocab];
                let mut edge_counts = vec![0u64; layout.edge_vocab];
                for &tk in x.node_tokens() {
                    node_counts[tk as usize] += 1;
                }
                for &tk in x.edge_tokens() {
                    edge_counts[tk as usize] += 1;
                }
                let mut parts = node_counts;
                parts.push(u64::MAX);
                parts.extend(edge_counts);
                let pooled = fold(&parts);
                let state = (layout.state_space() <= full_state_limit).then(|| x.state_index());
                Ok(Prepared::Positional { x, bucket, pooled, state })
            }
            Featurizer::Graph => {
                let ctx = ctx.ok_or_else(|| Error::Config("graph features need a conditioning context".into()))?;
                if ctx.source.layout() != x.layout() {
                    return Err(Error::DimensionMismatch { expected: ctx.source.dims(), got: x.dims() });
                }
                Ok(graph_prepare(x, ctx, bucket))
            }
        }
    }

    /// Fills `out` with the keys of `dim` and returns how many were written.
    #[inline]
    pub(crate) fn keys(&self, dim: usize, out: &mut [u64; MAX_KEYS]) -> usize {
        match self {
            Prepared::Positional { x, bucket, pooled, state } => {
                let d = dim as u64;
                let own = x.token(dim) as u64;
                out[0] = fold(&[1, *bucket, d, own]);
                out[1] = fold(&[2, *bucket, d, own, *pooled]);
                match state {
                    Some(s) => {
                        out[2] = fold(&[3, *bucket, d, *s]);
                        3
                    }
                    None => 2,
                }
            }
            Prepared::Graph { x, ctx, bucket, node, global, pairs } => {
                let layout = x.layout();
                if layout.is_node(dim) {
                    let sl = ctx.source.token(dim) as u64;
                    let cl = x.token(dim) as u64;
                    let info = node[dim];
                    out[0] = fold(&[10, *bucket, sl, cl]);
                    out[1] = fold(&[11, *bucket, sl, cl, info.desc, info.gained_labels]);
                    out[2] = fold(&[12, *bucket, sl, cl, info.desc, info.gained_labels, *global]);
                } else {
                    let (u, v) = pairs[dim - layout.nodes];
                    let se = ctx.source.token(dim) as u64;
                    let ce = x.token(dim) as u64;
                    let pe = ctx.product.token(dim) as u64;
                    let (a, b) = {
                        let (p, q) = (node[u as usize].desc, node[v as usize].desc);
                        if p <= q {
                            (p, q)
                        } else {
                            (q, p)
                        }
                    };
                    out[0] = fold(&[20, *bucket, se, ce, pe]);
                    out[1] = fold(&[21, *bucket, se, ce, pe, a, b]);
                    out[2] = fold(&[22, *bucket, se, ce, pe, a, b, *global]);
                }
                3
            }
        }
    }
}

fn graph_prepare<'a>(x: &'a FlatState, ctx: &'a GraphContext, bucket: u64) -> Prepared<'a> {
    let layout: Layout = x.layout();
    let n = layout.nodes;
    let mut lost = vec![0u64; n];
    let mut gained = vec![0u64; n];
    let mut center = vec![0u64; n];
    let mut sdeg = vec![0u64; n];
    let mut gained_labels = vec![0u64; n];
    let (mut g_lost, mut g_gained, mut g_center) = (0u64, 0u64, 0u64);
    let pairs: Vec<(u16, u16)> = layout.edge_pairs().into_iter().map(|(i, j)| (i as u16, j as u16)).collect();
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let d = n + e;
        let (i, j) = (i as usize, j as usize);
        let se = ctx.source.tokens()[d];
        let ce = x.tokens()[d];
        let pe = ctx.product.tokens()[d];
        if se != NO_BOND {
            sdeg[i] += 1;
            sdeg[j] += 1;
        }
        if se != ce {
            if se != NO_BOND {
                lost[i] += 1;
                lost[j] += 1;
                g_lost += 1;
            }
            if ce != NO_BOND {
                gained[i] += 1;
                gained[j] += 1;
                g_gained += 1;
                gained_labels[i] |= 1 << x.token(j);
                gained_labels[j] |= 1 << x.token(i);
            }
        }
        if pe != NO_BOND && se == NO_BOND {
            center[i] += 1;
            center[j] += 1;
            g_center += 1;
        }
    }
    let mut g_relabel = 0u64;
    let node = (0..n)
        .map(|v| {
            let sl = ctx.source.token(v) as u64;
            let cl = x.token(v) as u64;
            if sl != cl {
                g_relabel += 1;
            }
            let desc = sl
                | cl << 8
                | lost[v].min(2) << 16
                | gained[v].min(2) << 20
                | center[v].min(2) << 24
                | sdeg[v].min(3) << 28;
            NodeInfo { desc, gained_labels: gained_labels[v] }
        })
        .collect();
    let global = g_lost.min(3) | g_gained.min(3) << 4 | g_relabel.min(3) << 8 | g_center.min(2) << 12;
    Prepared::Graph { x, ctx, bucket, node, global, pairs }
}
