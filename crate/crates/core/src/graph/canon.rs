//! Canonical serialization of small labelled graphs.
//!
//! Nodes are ordered by individualization-refinement: colour refinement from
//! node labels, then branching on the first non-singleton cell until the
//! partition is discrete. The canonical form is the smallest code over all
//! leaves of that search tree. Interchangeable nodes (same label, same bonds to
//! everything else) are branched on only once.

use super::{AttributedGraph, NO_BOND};
use crate::error::{Error, Result};

pub const MAX_CANONICAL_NODES: usize = 16;

/// Code: node count, node labels in canonical order, then the upper triangle
/// in column-major order.
pub fn canonical_form(g: &AttributedGraph) -> Result<Vec<u8>> {
    let n = g.n();
    if n > MAX_CANONICAL_NODES {
        return Err(Error::GraphTooLarge { nodes: n, max: MAX_CANONICAL_NODES });
    }
    if n == 0 {
        return Ok(vec![0]);
    }
    let adj = dense(g);
    let twins = twin_classes(g, &adj);
    let colors = refine(g, &adj, initial_colors(g));
    let mut best: Option<Vec<u8>> = None;
    search(g, &adj, &twins, colors, &mut best);
    Ok(best.expect("search visits at least one leaf"))
}

/// Labelled-graph isomorphism through canonical forms.
pub fn isomorphic(a: &AttributedGraph, b: &AttributedGraph) -> Result<bool> {
    if a.n() != b.n() || a.bond_count() != b.bond_count() {
        return Ok(false);
    }
    let mut la = a.labels().to_vec();
    let mut lb = b.labels().to_vec();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return Ok(false);
    }
    Ok(canonical_form(a)? == canonical_form(b)?)
}

fn dense(g: &AttributedGraph) -> Vec<Vec<u8>> {
    let n = g.n();
    let mut m = vec![vec![NO_BOND; n]; n];
    for (i, j, l) in g.bonds() {
        m[i][j] = l;
        m[j][i] = l;
    }
    m
}

fn initial_colors(g: &AttributedGraph) -> Vec<u32> {
    g.labels().iter().map(|&l| l as u32).collect()
}

/// Twin class id per node; twins can be swapped by an automorphism.
fn twin_classes(g: &AttributedGraph, adj: &[Vec<u8>]) -> Vec<usize> {
    let n = g.n();
    let mut class: Vec<usize> = (0..n).collect();
    for v in 0..n {
        for w in 0..v {
            if class[w] != w || g.label(v) != g.label(w) || adj[v][w] != NO_BOND {
                continue;
            }
            let same = (0..n).all(|x| x == v || x == w || adj[v][x] == adj[w][x]);
            if same {
                class[v] = w;
                break;
            }
        }
    }
    class
}

/// Equitable refinement; colours are ranks of sorted signatures so they only
/// depend on the graph, never on node indices.
fn refine(g: &AttributedGraph, adj: &[Vec<u8>], mut colors: Vec<u32>) -> Vec<u32> {
    let n = g.n();
    let mut distinct = count_distinct(&colors);
    loop {
        let mut sigs: Vec<(u32, Vec<(u8, u32)>)> = (0..n)
            .map(|u| {
                let mut nb: Vec<(u8, u32)> = (0..n)
                    .filter(|&v| v != u && adj[u][v] != NO_BOND)
                    .map(|v| (adj[u][v], colors[v]))
                    .collect();
                nb.sort_unstable();
                (colors[u], nb)
            })
            .collect();
        let mut sorted = sigs.clone();
        sorted.sort();
        sorted.dedup();
        let next: Vec<u32> = sigs
            .drain(..)
            .map(|s| sorted.binary_search(&s).expect("signature present") as u32)
            .collect();
        let d = sorted.len();
        colors = next;
        if d == distinct {
            return colors;
        }
        distinct = d;
    }
}

fn count_distinct(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn search(
    g: &AttributedGraph,
    adj: &[Vec<u8>],
    twins: &[usize],
    colors: Vec<u32>,
    best: &mut Option<Vec<u8>>,
) {
    let n = g.n();
    // first non-singleton cell in colour order
    let mut counts = std::collections::BTreeMap::new();
    for &c in &colors {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let target = counts.iter().find(|(_, &k)| k > 1).map(|(&c, _)| c);
    let Some(cell) = target else {
        let code = leaf_code(g, adj, &colors);
        if best.as_ref().map_or(true, |b| code < *b) {
            *best = Some(code);
        }
        return;
    };
    let mut tried_classes: Vec<usize> = Vec::new();
    for v in 0..n {
        if colors[v] != cell || tried_classes.contains(&twins[v]) {
            continue;
        }
        tried_classes.push(twins[v]);
        // individualize v just ahead of the rest of its cell
        let split: Vec<u32> = colors
            .iter()
            .enumerate()
            .map(|(u, &c)| if u == v { 2 * c } else { 2 * c + 1 })
            .collect();
        let refined = refine(g, adj, split);
        search(g, adj, twins, refined, best);
    }
}

fn leaf_code(g: &AttributedGraph, adj: &[Vec<u8>], colors: &[u32]) -> Vec<u8> {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| colors[u]);
    let mut code = Vec::with_capacity(1 + n + n * (n - 1) / 2);
    code.push(n as u8);
    code.extend(order.iter().map(|&u| g.label(u)));
    for q in 1..n {
        for p in 0..q {
            code.push(adj[order[p]][order[q]]);
        }
    }
    code
}
