use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use crate::denoiser::{GraphContext, TabularDenoiser};
use crate::discrete::RandomStream;
use crate::error::{Error, Result};
use crate::flow::TimeGrid;
use crate::graph::{AttributedGraph, FlatState};
use crate::retro::{
    derive_synthons, merge_synthon_budgets, predict_reaction_centers, rank_by_frequency, read_reactions,
    topk_metrics, MetricRecord, RankedPredictionSet, Reaction, RewardOracle, EDGE_VOCAB, NODE_VOCAB,
};
use crate::steering::{greedy_baseline_run, plain_run, smc_run};

/// Stream id of the per-product evaluation streams.
pub const PRODUCT_TAG: u64 = 0x7072_6f64_7563_7473;

/// Reactants padded to the node count of the padded product, so that source
/// and target share one layout.
pub fn padded_reactants(r: &Reaction, dummy_count: usize) -> Result<AttributedGraph> {
    let total = r.product.n() + dummy_count;
    if r.reactants.n() > total {
        return Err(Error::Config(format!(
            "reactants have {} nodes, more than the product plus {dummy_count} dummies",
            r.reactants.n()
        )));
    }
    Ok(r.reactants.pad_with_dummies(total - r.reactants.n()))
}

pub fn flat(g: &AttributedGraph) -> Result<FlatState> {
    g.flatten(NODE_VOCAB, EDGE_VOCAB)
}

/// One conditioning source with its sample budget.
#[derive(Clone, Debug)]
pub struct SourcePlan {
    pub center: Option<(usize, usize)>,
    pub context: GraphContext,
    pub budget: usize,
}

/// Product-sourced modes get one plan with all samples. Synthon modes get one
/// plan per predicted center; budgets of missing centers go to the first one,
/// and a product without centers falls back to the product source.
pub fn plan_sources(r: &Reaction, cfg: &ExperimentConfig) -> Result<Vec<SourcePlan>> {
    let product = flat(&r.product.pad_with_dummies(cfg.dummy_count))?;
    if !cfg.mode.uses_synthons() {
        return Ok(vec![SourcePlan { center: None, context: GraphContext::product_sourced(product), budget: cfg.samples }]);
    }
    let centers = if r.product.bond_count() == 0 { Vec::new() } else { predict_reaction_centers(&r.product, cfg.centers)? };
    if centers.is_empty() {
        return Ok(vec![SourcePlan { center: None, context: GraphContext::product_sourced(product), budget: cfg.samples }]);
    }
    let mut plans = Vec::with_capacity(centers.len());
    for (g, &(c, _)) in centers.iter().enumerate() {
        let synthons = flat(&derive_synthons(&r.product, c)?.pad_with_dummies(cfg.dummy_count))?;
        plans.push(SourcePlan {
            center: Some(c),
            context: GraphContext::new(synthons, product.clone())?,
            budget: cfg.budgets[g],
        });
    }
    let unused: usize = cfg.budgets[centers.len()..].iter().sum();
    plans[0].budget += unused;
    Ok(plans)
}

/// Draws every sample of one product. Sample `s` (counted across groups)
/// runs on `stream.derive(s)`.
pub fn draw_samples(
    model: &TabularDenoiser,
    r: &Reaction,
    cfg: &ExperimentConfig,
    plans: &[SourcePlan],
    stream: &RandomStream,
) -> Result<Vec<Vec<AttributedGraph>>> {
    let grid = TimeGrid::new(cfg.steps)?;
    let steering = cfg.steering();
    let oracle = RewardOracle::new(r.product.clone());
    let mut offset = 0u64;
    let mut groups = Vec::with_capacity(plans.len());
    for plan in plans {
        let den = model.conditioned(plan.context.clone());
        let source = plan.context.source.clone();
        let x0 = move |_: &mut RandomStream| Ok(source.clone());
        let mut out = Vec::with_capacity(plan.budget);
        for s in 0..plan.budget as u64 {
            let run = stream.derive(offset + s);
            let x1 = match cfg.mode {
                Mode::Rpf | Mode::Rsf => plain_run(&x0, &den, &grid, cfg.stepper, &run)?,
                Mode::RpfRs | Mode::RsfRs => {
                    smc_run(&x0, &den, &oracle, &grid, &steering, &run, None)?.selected_state().clone()
                }
                Mode::Greedy => greedy_baseline_run(&x0, &den, &oracle, &grid, cfg.particles, cfg.stepper, &run)?.state,
            };
            out.push(x1.unflatten());
        }
        offset += plan.budget as u64;
        groups.push(out);
    }
    Ok(groups)
}

/// Ranked predictions and metrics for one product's samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductResult {
    pub index: usize,
    pub centers: Vec<[usize; 2]>,
    pub metrics: MetricRecord,
    /// Frequency-weighted reward of all samples.
    pub mean_reward: f64,
    pub ranked: RankedPredictionSet,
}

pub fn score_samples(
    index: usize,
    r: &Reaction,
    plans: &[SourcePlan],
    groups: &[Vec<AttributedGraph>],
    ks: &[usize],
) -> Result<ProductResult> {
    let ranked_groups = groups.iter().map(|g| rank_by_frequency(g)).collect::<Result<Vec<_>>>()?;
    let budgets: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let ranked = merge_synthon_budgets(&ranked_groups, &budgets)?;
    let oracle = RewardOracle::new(r.product.clone());
    let metrics = topk_metrics(&ranked, &r.reactants, &oracle, ks)?;
    let mut mean_reward = 0.0;
    for (i, e) in ranked.entries.iter().enumerate() {
        let rw = match metrics.rewards.get(i) {
            Some(&v) => v,
            None => oracle.score(&e.graph)?,
        };
        mean_reward += rw * e.score;
    }
    Ok(ProductResult {
        index,
        centers: plans.iter().filter_map(|p| p.center.map(|(i, j)| [i, j])).collect(),
        metrics,
        mean_reward,
        ranked,
    })
}

pub fn product_stream(seed: u64, index: usize) -> RandomStream {
    RandomStream::new(seed, PRODUCT_TAG).derive(index as u64)
}

pub fn evaluate_product(model: &TabularDenoiser, r: &Reaction, index: usize, cfg: &ExperimentConfig) -> Result<ProductResult> {
    let plans = plan_sources(r, cfg)?;
    let groups = draw_samples(model, r, cfg, &plans, &product_stream(cfg.seed, index))?;
    score_samples(index, r, &plans, &groups, &cfg.ks)
}

/// Test-set means of every metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub products: usize,
    pub ks: Vec<usize>,
    pub exact: Vec<f64>,
    pub round_trip: Vec<f64>,
    pub coverage: Vec<f64>,
    pub mean_reward: f64,
}

impl MetricSummary {
    /// Means in product order, so the result does not depend on scheduling.
    pub fn from_results(ks: &[usize], results: &[ProductResult]) -> Self {
        let n = results.len().max(1) as f64;
        let mean = |f: &dyn Fn(&ProductResult) -> f64| results.iter().map(f).sum::<f64>() / n;
        let per_k = |sel: fn(&MetricRecord) -> &Vec<f64>| {
            (0..ks.len()).map(|i| mean(&|p: &ProductResult| sel(&p.metrics)[i])).collect::<Vec<f64>>()
        };
        Self {
            products: results.len(),
            ks: ks.to_vec(),
            exact: per_k(|m| &m.exact),
            round_trip: per_k(|m| &m.round_trip),
            coverage: per_k(|m| &m.coverage),
            mean_reward: mean(&|p| p.mean_reward),
        }
    }

    pub fn at(&self, k: usize) -> Option<(f64, f64, f64)> {
        let i = self.ks.iter().position(|&x| x == k)?;
        Some((self.exact[i], self.round_trip[i], self.coverage[i]))
    }
}

/// Everything `eval` writes to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub metrics: MetricSummary,
    #[serde(skip)]
    pub results: Vec<ProductResult>,
}

pub fn run_experiment(cfg: &ExperimentConfig, model: &TabularDenoiser, reactions: &[Reaction]) -> Result<RunReport> {
    cfg.validate()?;
    let take = cfg.limit.map_or(reactions.len(), |l| l.min(reactions.len()));
    let results = reactions[..take]
        .par_iter()
        .enumerate()
        .map(|(i, r)| evaluate_product(model, r, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport { config: cfg.clone(), metrics: MetricSummary::from_results(&cfg.ks, &results), results })
}

/// Loads the dataset and checkpoint named in `cfg` and runs it.
pub fn run_experiment_from_files(cfg: &ExperimentConfig) -> Result<RunReport> {
    let model = load_model(&cfg.model)?;
    let reactions = read_reactions(&cfg.dataset)?;
    run_experiment(cfg, &model, &reactions)
}

pub fn load_model(path: &Path) -> Result<TabularDenoiser> {
    if !path.exists() {
        return Err(Error::Config(format!("model checkpoint {} not found", path.display())));
    }
    TabularDenoiser::load(path)
}
