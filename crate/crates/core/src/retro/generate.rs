use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{derive_synthons, predict_reaction_centers, ATOM_A, ATOM_B, ATOM_C, DOUBLE, L1, L2, SINGLE};
use crate::discrete::RandomStream;
use crate::error::{Error, Result};
use crate::graph::{random_permutation, AttributedGraph, MAX_CANONICAL_NODES, NO_BOND};

/// One product, its reactants (a single graph whose first `n` nodes are the
/// product's nodes) and the bond that was formed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reaction {
    pub product: AttributedGraph,
    pub reactants: AttributedGraph,
    pub bridge: [usize; 2],
}

impl Reaction {
    pub fn bridge(&self) -> (usize, usize) {
        (self.bridge[0], self.bridge[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub count: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub min_fragment_nodes: usize,
    pub max_fragment_nodes: usize,
    pub ring_probability: f64,
    pub double_bond_probability: f64,
    /// Share of products whose first attachment atom is `C`, which takes
    /// either leaving group.
    pub multi_answer_fraction: f64,
    pub max_product_nodes: usize,
    pub dummy_count: usize,
    /// The formed bond must rank within this many predicted centers.
    pub center_rank: usize,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            split: [0.8, 0.1, 0.1],
            min_fragment_nodes: 2,
            max_fragment_nodes: 5,
            ring_probability: 0.3,
            double_bond_probability: 0.2,
            multi_answer_fraction: 0.5,
            max_product_nodes: 12,
            dummy_count: 10,
            center_rank: 2,
            max_attempts: 10_000,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.min_fragment_nodes == 0 || self.min_fragment_nodes > self.max_fragment_nodes {
            return bad(format!(
                "fragment sizes {}..={} are empty",
                self.min_fragment_nodes, self.max_fragment_nodes
            ));
        }
        if 2 * self.max_fragment_nodes > self.max_product_nodes.min(MAX_CANONICAL_NODES) {
            return bad(format!(
                "two fragments of {} nodes exceed the product cap {}",
                self.max_fragment_nodes,
                self.max_product_nodes.min(MAX_CANONICAL_NODES)
            ));
        }
        if self.dummy_count < 2 {
            return bad("reactants need at least two dummy slots for leaving groups".into());
        }
        for (name, p) in [
            ("ring_probability", self.ring_probability),
            ("double_bond_probability", self.double_bond_probability),
            ("multi_answer_fraction", self.multi_answer_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if self.split.iter().any(|f| !(*f >= 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {:?} must be non-negative and sum to 1", self.split));
        }
        if self.center_rank == 0 || self.max_attempts == 0 {
            return bad("center_rank and max_attempts must be positive".into());
        }
        Ok(())
    }

    /// Train, validation and test sizes.
    pub fn split_sizes(&self) -> [usize; 3] {
        let train = (self.count as f64 * self.split[0]).round() as usize;
        let valid = ((self.count as f64 * self.split[1]).round() as usize).min(self.count - train.min(self.count));
        let train = train.min(self.count);
        [train, valid, self.count - train - valid]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<Reaction>,
    pub valid: Vec<Reaction>,
    pub test: Vec<Reaction>,
}

/// Generates `cfg.count` reactions; reaction `i` is drawn from `rng.derive(i)`.
pub fn generate_dataset(cfg: &GenConfig, rng: &RandomStream) -> Result<SplitDataset> {
    cfg.validate()?;
    let all = (0..cfg.count)
        .map(|i| generate_reaction(cfg, &mut rng.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let [train, valid, _] = cfg.split_sizes();
    let mut it = all.into_iter();
    Ok(SplitDataset {
        train: it.by_ref().take(train).collect(),
        valid: it.by_ref().take(valid).collect(),
        test: it.collect(),
    })
}

fn fragment(size: usize, cfg: &GenConfig, rng: &mut RandomStream) -> (Vec<u8>, Vec<(usize, usize, u8)>) {
    let atoms = [ATOM_A, ATOM_B, ATOM_C];
    let labels = (0..size).map(|_| atoms[rng.below(3)]).collect();
    let mut bonds = Vec::with_capacity(size);
    for v in 1..size {
        let parent = rng.below(v);
        let l = if rng.uniform() < cfg.double_bond_probability { DOUBLE } else { SINGLE };
        bonds.push((parent, v, l));
    }
    if size >= 3 && rng.uniform() < cfg.ring_probability {
        let open: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (i + 1..size).map(move |j| (i, j)))
            .filter(|&(i, j)| !bonds.iter().any(|&(a, b, _)| (a, b) == (i, j) || (b, a) == (i, j)))
            .collect();
        if !open.is_empty() {
            let (i, j) = open[rng.below(open.len())];
            bonds.push((i, j, SINGLE));
        }
    }
    (labels, bonds)
}

fn leaving_for(label: u8, rng: &mut RandomStream) -> u8 {
    match label {
        ATOM_A => L1,
        ATOM_B => L2,
        _ => {
            if rng.uniform() < 0.5 {
                L1
            } else {
                L2
            }
        }
    }
}

fn generate_reaction(cfg: &GenConfig, rng: &mut RandomStream) -> Result<Reaction> {
    let span = cfg.max_fragment_nodes - cfg.min_fragment_nodes + 1;
    for _ in 0..cfg.max_attempts {
        let s1 = cfg.min_fragment_nodes + rng.below(span);
        let s2 = cfg.min_fragment_nodes + rng.below(span);
        let (mut labels, mut bonds) = fragment(s1, cfg, rng);
        let (l2, b2) = fragment(s2, cfg, rng);
        labels.extend(l2);
        bonds.extend(b2.into_iter().map(|(a, b, l)| (a + s1, b + s1, l)));
        let i = rng.below(s1);
        let j = s1 + rng.below(s2);
        let pick_ab = |rng: &mut RandomStream| if rng.uniform() < 0.5 { ATOM_A } else { ATOM_B };
        if rng.uniform() < cfg.multi_answer_fraction {
            labels[i] = ATOM_C;
        } else {
            labels[i] = pick_ab(rng);
        }
        labels[j] = pick_ab(rng);
        bonds.push((i, j, SINGLE));
        let n = s1 + s2;
        let product = AttributedGraph::from_bonds(labels, &bonds)?;

        let perm = random_permutation(n, rng);
        let product = product.permuted(&perm);
        let (pi, pj) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
        let centers = predict_reaction_centers(&product, cfg.center_rank)?;
        if !centers.iter().any(|&(c, _)| c == (pi, pj)) {
            continue;
        }
        let mut reactants = derive_synthons(&product, (pi, pj))?.pad_with_dummies(cfg.dummy_count);
        for (slot, atom) in [(n, pi), (n + 1, pj)] {
            let lg = leaving_for(product.label(atom), rng);
            reactants.set_label(slot, lg);
            reactants.set_edge(atom, slot, SINGLE);
        }
        let reactants = reactants.induced(&(0..n + 2).collect::<Vec<_>>());
        debug_assert!(reactants.bonds().all(|(_, _, l)| l != NO_BOND));
        return Ok(Reaction { product, reactants, bridge: [pi, pj] });
    }
    Err(Error::Config(format!(
        "no reaction with its center in the top {} after {} attempts",
        cfg.center_rank, cfg.max_attempts
    )))
}

pub fn write_reactions(path: impl AsRef<Path>, reactions: &[Reaction]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in reactions {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_reactions(path: impl AsRef<Path>) -> Result<Vec<Reaction>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
