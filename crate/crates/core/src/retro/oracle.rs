use super::{is_leaving, SINGLE};
use crate::error::{Error, Result};
use crate::features::connected_components;
use crate::graph::{isomorphic, AttributedGraph, FlatState, NO_BOND};
use crate::steering::Reward;

/// Joins two capped fragments into their product, or `None` when the graph
/// (after dropping isolated dummies) is not exactly two components that each
/// hold one leaving node of degree one.
pub fn forward_synthesis(reactants: &AttributedGraph) -> Option<AttributedGraph> {
    let g = reactants.strip_dummies();
    let (count, comp) = connected_components(&g);
    if count != 2 {
        return None;
    }
    let mut leaving = [None::<usize>; 2];
    for v in 0..g.n() {
        if is_leaving(g.label(v)) {
            let slot = &mut leaving[comp[v]];
            if slot.is_some() || g.degree(v) != 1 {
                return None;
            }
            *slot = Some(v);
        }
    }
    let (Some(a), Some(b)) = (leaving[0], leaving[1]) else {
        return None;
    };
    let ia = g.neighbors(a).next()?;
    let ib = g.neighbors(b).next()?;
    let keep: Vec<usize> = (0..g.n()).filter(|&v| v != a && v != b).collect();
    let mut product = g.induced(&keep);
    let pos = |v: usize| keep.iter().position(|&k| k == v).expect("attachment is kept");
    product.set_edge(pos(ia), pos(ib), SINGLE);
    Some(product)
}

/// `1` when forward synthesis of `candidate` gives `product` up to isomorphism.
pub fn reward(candidate: &AttributedGraph, product: &AttributedGraph) -> Result<f64> {
    RewardOracle::new(product.clone()).score(candidate)
}

/// Forward-synthesis feasibility check against one fixed product.
#[derive(Clone, Debug)]
pub struct RewardOracle {
    target: AttributedGraph,
}

impl RewardOracle {
    pub fn new(product: AttributedGraph) -> Self {
        Self { target: product.strip_dummies() }
    }

    pub fn target(&self) -> &AttributedGraph {
        &self.target
    }

    pub fn score(&self, candidate: &AttributedGraph) -> Result<f64> {
        let Some(p) = forward_synthesis(candidate) else {
            return Ok(0.0);
        };
        // node-aligned candidates reproduce the product index by index
        if p == self.target {
            return Ok(1.0);
        }
        Ok(if isomorphic(&p, &self.target)? { 1.0 } else { 0.0 })
    }
}

impl Reward for RewardOracle {
    fn reward(&self, x: &FlatState) -> Result<f64> {
        self.score(&x.unflatten())
    }
}

/// Size of the component holding `start` when the bond `(skip_i, skip_j)` is ignored.
fn component_size(g: &AttributedGraph, start: usize, skip: (usize, usize)) -> (usize, Vec<bool>) {
    let mut seen = vec![false; g.n()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut size = 0;
    while let Some(v) = stack.pop() {
        size += 1;
        for w in g.neighbors(v) {
            if (v, w) == skip || (w, v) == skip || seen[w] {
                continue;
            }
            seen[w] = true;
            stack.push(w);
        }
    }
    (size, seen)
}

/// Scores every bond: a bridge splitting its endpoints' component into parts
/// of sizes `a` and `b` scores `1 / (1 + |a - b|)`, any other bond scores 0.
/// Returns the top `m` positive scores, ties in lexicographic bond order.
pub fn predict_reaction_centers(product: &AttributedGraph, m: usize) -> Result<Vec<((usize, usize), f64)>> {
    if m == 0 {
        return Err(Error::Config("need at least one reaction center".into()));
    }
    if product.bond_count() == 0 {
        return Err(Error::InvalidGraph("product has no bonds".into()));
    }
    let mut scored = Vec::new();
    for (i, j, _) in product.bonds() {
        let (a, reach) = component_size(product, i, (i, j));
        if reach[j] {
            continue;
        }
        let (b, _) = component_size(product, j, (i, j));
        scored.push(((i, j), 1.0 / (1.0 + a.abs_diff(b) as f64)));
    }
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.truncate(m);
    Ok(scored)
}

/// The product with the center bond removed; nodes are untouched.
pub fn derive_synthons(product: &AttributedGraph, center: (usize, usize)) -> Result<AttributedGraph> {
    let (i, j) = center;
    if i == j || i >= product.n() || j >= product.n() || product.edge(i, j) == NO_BOND {
        return Err(Error::MissingBond(i, j));
    }
    let mut g = product.clone();
    g.set_edge(i, j, NO_BOND);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retro::{ATOM_A, ATOM_B, ATOM_C, DOUBLE, L1, L2};

    fn path(n: usize) -> AttributedGraph {
        let bonds: Vec<_> = (0..n - 1).map(|i| (i, i + 1, SINGLE)).collect();
        AttributedGraph::from_bonds(vec![ATOM_A; n], &bonds).unwrap()
    }

    fn sample_reaction() -> (AttributedGraph, AttributedGraph) {
        // A=B-C | C-A, joined by 1-3
        let product = AttributedGraph::from_bonds(
            vec![ATOM_A, ATOM_B, ATOM_C, ATOM_C, ATOM_A],
            &[(0, 1, DOUBLE), (1, 2, SINGLE), (3, 4, SINGLE), (1, 3, SINGLE)],
        )
        .unwrap();
        let mut reactants = derive_synthons(&product, (1, 3)).unwrap().pad_with_dummies(4);
        reactants.set_label(5, L2);
        reactants.set_edge(1, 5, SINGLE);
        reactants.set_label(6, L1);
        reactants.set_edge(3, 6, SINGLE);
        (product, reactants)
    }

    #[test]
    fn three_node_path_centers() {
        let c = predict_reaction_centers(&path(3), 2).unwrap();
        assert_eq!(c, vec![((0, 1), 0.5), ((1, 2), 0.5)]);
    }

    #[test]
    fn triangle_has_no_centers() {
        let tri = AttributedGraph::from_bonds(vec![ATOM_A; 3], &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert!(predict_reaction_centers(&tri, 2).unwrap().is_empty());
        assert!(predict_reaction_centers(&AttributedGraph::edgeless(vec![ATOM_A; 2]), 1).is_err());
    }

    #[test]
    fn balanced_bridge_ranks_first() {
        let c = predict_reaction_centers(&path(6), 3).unwrap();
        assert_eq!(c[0], ((2, 3), 1.0));
        assert_eq!(c[1].0, (1, 2));
        assert_eq!(c[2].0, (3, 4));
    }

    #[test]
    fn forward_synthesis_rebuilds_the_product() {
        let (product, reactants) = sample_reaction();
        let p = forward_synthesis(&reactants).unwrap();
        assert!(isomorphic(&p, &product).unwrap());
        assert_eq!(reward(&reactants, &product).unwrap(), 1.0);
        assert_eq!(reward(&product, &product).unwrap(), 0.0);
    }

    #[test]
    fn swapped_leaving_groups_stay_feasible() {
        let (product, mut reactants) = sample_reaction();
        reactants.set_label(5, L1);
        reactants.set_label(6, L2);
        assert_eq!(reward(&reactants, &product).unwrap(), 1.0);
    }

    #[test]
    fn rule_violations_are_infeasible() {
        let (_, reactants) = sample_reaction();
        let mut three = reactants.clone();
        three.set_label(7, ATOM_A);
        assert!(forward_synthesis(&three).is_none());
        let mut double_leaving = reactants.clone();
        double_leaving.set_label(7, L1);
        double_leaving.set_edge(0, 7, SINGLE);
        assert!(forward_synthesis(&double_leaving).is_none());
        let mut branched = reactants;
        branched.set_edge(5, 0, SINGLE);
        assert!(forward_synthesis(&branched).is_none());
    }

    #[test]
    fn synthons_drop_exactly_one_bond() {
        let (product, _) = sample_reaction();
        let s = derive_synthons(&product, (1, 3)).unwrap();
        assert_eq!(connected_components(&s).0, 2);
        assert_eq!(s.labels(), product.labels());
        let mut back = s.clone();
        back.set_edge(1, 3, SINGLE);
        assert_eq!(back, product);
        assert!(matches!(derive_synthons(&product, (0, 4)), Err(Error::MissingBond(0, 4))));
    }
}
