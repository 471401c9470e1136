//! A synthetic fragment-join reaction world with exact oracles.
//!
//! A product is two small fragments joined by one single bond (the reaction
//! center). Its reactants are the two fragments, each capped at the cut site
//! by a one-node leaving group. Forward synthesis reverses that: it drops both
//! leaving nodes and joins their attachment atoms.

mod generate;
mod oracle;
mod ranking;

pub use generate::{generate_dataset, read_reactions, write_reactions, GenConfig, Reaction, SplitDataset};
pub use oracle::{derive_synthons, forward_synthesis, predict_reaction_centers, reward, RewardOracle};
pub use ranking::{
    graph_key, merge_synthon_budgets, rank_by_frequency, topk_metrics, MetricRecord, RankedEntry,
    RankedPredictionSet, DEFAULT_KS,
};

/// Node labels. `DUMMY` is the padding atom, `L1`/`L2` are leaving groups.
pub const DUMMY: u8 = crate::graph::DUMMY;
pub const L1: u8 = 1;
pub const L2: u8 = 2;
pub const ATOM_A: u8 = 3;
pub const ATOM_B: u8 = 4;
pub const ATOM_C: u8 = 5;
pub const NODE_VOCAB: usize = 6;

/// Edge labels.
pub const SINGLE: u8 = 1;
pub const DOUBLE: u8 = 2;
pub const EDGE_VOCAB: usize = 3;

pub fn is_leaving(label: u8) -> bool {
    label == L1 || label == L2
}
