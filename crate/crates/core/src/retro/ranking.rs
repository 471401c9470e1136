use serde::{Deserialize, Serialize};

use super::RewardOracle;
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, MAX_CANONICAL_NODES};

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];

/// Marks keys of graphs too large to canonicalize; canonical codes start with
/// the node count, which never reaches this value.
const RAW_KEY_MARKER: u8 = u8::MAX;

/// Identity of a candidate after dropping isolated dummies: its canonical
/// form, or for graphs above the canonicalization limit the raw labels and
/// upper triangle (such graphs only merge with identically ordered copies).
pub fn graph_key(g: &AttributedGraph) -> Result<Vec<u8>> {
    let s = g.strip_dummies();
    if s.n() <= MAX_CANONICAL_NODES {
        return s.canonical_form();
    }
    let mut key = vec![RAW_KEY_MARKER];
    key.extend_from_slice(&(s.n() as u32).to_le_bytes());
    key.extend_from_slice(s.labels());
    key.extend_from_slice(s.upper());
    Ok(key)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// First-seen representative with isolated dummies removed.
    pub graph: AttributedGraph,
    #[serde(skip)]
    pub key: Vec<u8>,
    pub count: usize,
    pub score: f64,
}

/// Distinct candidates by descending score, ties by ascending key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedPredictionSet {
    pub entries: Vec<RankedEntry>,
    pub total: usize,
}

impl RankedPredictionSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_counts(mut entries: Vec<RankedEntry>, total: usize) -> Self {
        for e in entries.iter_mut() {
            e.score = e.count as f64 / total as f64;
        }
        entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
        Self { entries, total }
    }
}

fn accumulate(entries: &mut Vec<RankedEntry>, key: Vec<u8>, graph: impl FnOnce() -> AttributedGraph, count: usize) {
    match entries.iter_mut().find(|e| e.key == key) {
        Some(e) => e.count += count,
        None => entries.push(RankedEntry { graph: graph(), key, count, score: 0.0 }),
    }
}

/// Deduplicates samples up to isomorphism and scores each by its frequency.
pub fn rank_by_frequency(samples: &[AttributedGraph]) -> Result<RankedPredictionSet> {
    if samples.is_empty() {
        return Err(Error::Config("cannot rank an empty sample set".into()));
    }
    let mut entries: Vec<RankedEntry> = Vec::new();
    for s in samples {
        accumulate(&mut entries, graph_key(s)?, || s.strip_dummies(), 1);
    }
    Ok(RankedPredictionSet::from_counts(entries, samples.len()))
}

/// Pools per-center ranked sets whose sample counts match `budgets`; scores
/// become counts over the pooled total.
pub fn merge_synthon_budgets(groups: &[RankedPredictionSet], budgets: &[usize]) -> Result<RankedPredictionSet> {
    if groups.len() != budgets.len() {
        return Err(Error::Config(format!("{} groups for {} budgets", groups.len(), budgets.len())));
    }
    for (g, &b) in groups.iter().zip(budgets) {
        if g.total != b {
            return Err(Error::BudgetMismatch { sum: g.total, expected: b });
        }
    }
    let total: usize = budgets.iter().sum();
    if total == 0 {
        return Err(Error::BudgetMismatch { sum: 0, expected: 1 });
    }
    let mut entries: Vec<RankedEntry> = Vec::new();
    for g in groups {
        for e in &g.entries {
            accumulate(&mut entries, e.key.clone(), || e.graph.clone(), e.count);
        }
    }
    Ok(RankedPredictionSet::from_counts(entries, total))
}

/// Per-k exact match, round-trip accuracy and coverage of one prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub ks: Vec<usize>,
    pub exact: Vec<f64>,
    pub round_trip: Vec<f64>,
    pub coverage: Vec<f64>,
    /// Reward of each ranked entry, in rank order.
    pub rewards: Vec<f64>,
}

/// Scores `pred` against the true reactants. Missing slots below `k` count
/// as infeasible.
pub fn topk_metrics(
    pred: &RankedPredictionSet,
    truth: &AttributedGraph,
    oracle: &RewardOracle,
    ks: &[usize],
) -> Result<MetricRecord> {
    if pred.is_empty() {
        return Err(Error::Config("prediction set is empty".into()));
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let truth_key = graph_key(truth)?;
    let considered = &pred.entries[..kmax.min(pred.len())];
    let hit = considered.iter().position(|e| e.key == truth_key);
    let rewards = considered.iter().map(|e| oracle.score(&e.graph)).collect::<Result<Vec<f64>>>()?;
    let mut rec = MetricRecord { ks: ks.to_vec(), exact: vec![], round_trip: vec![], coverage: vec![], rewards };
    for &k in ks {
        let top = &rec.rewards[..k.min(rec.rewards.len())];
        rec.exact.push(if hit.is_some_and(|h| h < k) { 1.0 } else { 0.0 });
        rec.round_trip.push(top.iter().sum::<f64>() / k as f64);
        rec.coverage.push(if top.iter().any(|&r| r > 0.0) { 1.0 } else { 0.0 });
    }
    Ok(rec)
}
