//! Posterior models `p(x1 | x_t)`: the interface the flow engine samples
//! through, the exact oracle over a finite coupling, and a trainable
//! tabular model.

mod context;
mod exact;
mod tabular;

pub use context::{Featurizer, GraphContext};
pub use exact::{exact_posterior, ExactPosterior, MAX_EXACT_PAIRS};
pub use tabular::{
    softmax_ce_gradient, train_tabular, ConditionedModel, TabularDenoiser, TrainConfig, TrainingCurve, CHECKPOINT_FORMAT,
    TIME_BUCKETS,
};

use serde::{Deserialize, Serialize};

use crate::discrete::{argmax, Categorical, RandomStream};
use crate::error::{Error, Result};
use crate::graph::{FlatState, Layout};

/// Per-dimension posterior rows for one `(x_t, t)`.
pub trait Posterior {
    /// Writes the probability row of `dim` into `out` (length = vocabulary of `dim`).
    fn row(&self, dim: usize, out: &mut [f64]) -> Result<()>;

    /// Most probable token of `dim`, lowest index on ties.
    fn mode(&self, dim: usize, vocab: usize) -> Result<usize> {
        let mut buf = vec![0.0; vocab];
        self.row(dim, &mut buf)?;
        Ok(argmax(&buf))
    }
}

/// A model of `p(x1^i | x_t)`; evaluation must be safe to share across threads.
pub trait Denoiser: Send + Sync {
    /// Prepares the per-dimension posterior of `x` at time `t`.
    fn posterior<'a>(&'a self, x: &'a FlatState, t: f64) -> Result<Box<dyn Posterior + 'a>>;

    fn predict(&self, x: &FlatState, t: f64) -> Result<DenoiserOutput> {
        let post = self.posterior(x, t)?;
        let mut out = DenoiserOutput::zeroed(x.layout());
        for d in 0..x.dims() {
            post.row(d, out.row_mut(d))?;
        }
        Ok(out)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn posterior<'a>(&'a self, x: &'a FlatState, t: f64) -> Result<Box<dyn Posterior + 'a>> {
        (**self).posterior(x, t)
    }
}

/// One probability row per flat dimension, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserOutput {
    layout: Layout,
    probs: Vec<f64>,
}

fn row_offset(layout: &Layout, dim: usize) -> usize {
    if dim < layout.nodes {
        dim * layout.node_vocab
    } else {
        layout.nodes * layout.node_vocab + (dim - layout.nodes) * layout.edge_vocab
    }
}

impl DenoiserOutput {
    pub fn zeroed(layout: Layout) -> Self {
        let len = row_offset(&layout, layout.dims());
        Self { layout, probs: vec![0.0; len] }
    }

    /// Builds from explicit rows, validating each as a categorical.
    pub fn from_rows(layout: Layout, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != layout.dims() {
            return Err(Error::DimensionMismatch { expected: layout.dims(), got: rows.len() });
        }
        let mut out = Self::zeroed(layout);
        for (d, r) in rows.iter().enumerate() {
            if r.len() != layout.vocab(d) {
                return Err(Error::DimensionMismatch { expected: layout.vocab(d), got: r.len() });
            }
            let c = Categorical::new(r.clone())?;
            out.row_mut(d).copy_from_slice(c.weights());
        }
        Ok(out)
    }

    /// Point masses on every token of `x`.
    pub fn delta(x: &FlatState) -> Self {
        let mut out = Self::zeroed(x.layout());
        for d in 0..x.dims() {
            out.row_mut(d)[x.token(d)] = 1.0;
        }
        out
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dims(&self) -> usize {
        self.layout.dims()
    }

    pub fn row(&self, dim: usize) -> &[f64] {
        let o = row_offset(&self.layout, dim);
        &self.probs[o..o + self.layout.vocab(dim)]
    }

    pub fn row_mut(&mut self, dim: usize) -> &mut [f64] {
        let o = row_offset(&self.layout, dim);
        let v = self.layout.vocab(dim);
        &mut self.probs[o..o + v]
    }

    pub fn categorical(&self, dim: usize) -> Result<Categorical> {
        Categorical::new(self.row(dim).to_vec())
    }
}

impl Posterior for DenoiserOutput {
    fn row(&self, dim: usize, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(DenoiserOutput::row(self, dim));
        Ok(())
    }
}

/// How a denoiser output is collapsed into a single clean state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointEstimate {
    /// Per-dimension most probable token.
    #[default]
    Mode,
    /// One draw from the per-dimension posterior.
    Sample,
}

/// Per-dimension argmax, ties toward the lowest token.
pub fn point_estimate(out: &DenoiserOutput) -> FlatState {
    let layout = out.layout();
    let tokens = (0..layout.dims()).map(|d| argmax(out.row(d)) as u8).collect();
    FlatState::new(layout, tokens).expect("argmax stays inside each vocabulary")
}

/// Collapses a prepared posterior without materializing every row.
pub fn point_estimate_from(
    post: &dyn Posterior,
    layout: Layout,
    how: PointEstimate,
    rng: Option<&mut RandomStream>,
) -> Result<FlatState> {
    let mut tokens = Vec::with_capacity(layout.dims());
    match (how, rng) {
        (PointEstimate::Mode, _) => {
            for d in 0..layout.dims() {
                let v = layout.vocab(d);
                tokens.push(if v == 1 { 0 } else { post.mode(d, v)? as u8 });
            }
        }
        (PointEstimate::Sample, Some(rng)) => {
            let mut buf = vec![0.0; layout.node_vocab.max(layout.edge_vocab)];
            for d in 0..layout.dims() {
                let v = layout.vocab(d);
                if v == 1 {
                    tokens.push(0);
                    continue;
                }
                post.row(d, &mut buf[..v])?;
                tokens.push(crate::discrete::sample_row(&buf[..v], rng.uniform()) as u8);
            }
        }
        (PointEstimate::Sample, None) => {
            return Err(Error::Config("sampled point estimate needs a random stream".into()))
        }
    }
    FlatState::new(layout, tokens)
}

/// `-sum_nodes log p(target) - lambda_edge * sum_edges log p(target)`.
pub fn ce_loss(out: &DenoiserOutput, x1: &FlatState, lambda_edge: f64) -> Result<f64> {
    if out.layout() != x1.layout() {
        return Err(Error::DimensionMismatch { expected: out.dims(), got: x1.dims() });
    }
    let layout = out.layout();
    let mut loss = 0.0;
    for d in 0..layout.dims() {
        let w = if layout.is_node(d) { 1.0 } else { lambda_edge };
        if w == 0.0 {
            continue;
        }
        let p = out.row(d)[x1.token(d)];
        if p <= 0.0 {
            return Err(Error::LossOverflow(d));
        }
        loss -= w * p.ln();
    }
    Ok(loss.max(0.0))
}

/// A source/target pair with an optional product graph for conditioning
/// (when absent the source itself is the product).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPair {
    pub source: FlatState,
    pub target: FlatState,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<FlatState>,
}

fn unit_weight() -> f64 {
    1.0
}

impl CouplingPair {
    pub fn new(source: FlatState, target: FlatState) -> Self {
        Self { source, target, weight: 1.0, product: None }
    }

    pub fn weighted(source: FlatState, target: FlatState, weight: f64) -> Self {
        Self { source, target, weight, product: None }
    }
}

/// Node-aligned `(x0, x1)` pairs. Each pair has a single layout; pairs may
/// differ in node count but share the node and edge vocabularies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDataset {
    pairs: Vec<CouplingPair>,
}

impl CouplingDataset {
    pub fn new(pairs: Vec<CouplingPair>) -> Result<Self> {
        let first = pairs.first().ok_or_else(|| Error::Config("coupling dataset is empty".into()))?;
        let (nv, ev) = (first.source.layout().node_vocab, first.source.layout().edge_vocab);
        for p in &pairs {
            let layout = p.source.layout();
            if layout.node_vocab != nv || layout.edge_vocab != ev {
                return Err(Error::Config(format!(
                    "vocabularies ({}, {}) differ from ({nv}, {ev})",
                    layout.node_vocab, layout.edge_vocab
                )));
            }
            for s in [Some(&p.target), p.product.as_ref()].into_iter().flatten() {
                if s.layout() != layout {
                    return Err(Error::DimensionMismatch { expected: layout.dims(), got: s.dims() });
                }
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::InvalidDistribution(format!("pair weight {}", p.weight)));
            }
        }
        if pairs.iter().all(|p| p.weight == 0.0) {
            return Err(Error::InvalidDistribution("all pair weights are zero".into()));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[CouplingPair] {
        &self.pairs
    }

    /// Layout of the first pair.
    pub fn layout(&self) -> Layout {
        self.pairs[0].source.layout()
    }

    /// The common layout, if every pair has the same one.
    pub fn uniform_layout(&self) -> Option<Layout> {
        let l = self.layout();
        self.pairs.iter().all(|p| p.source.layout() == l).then_some(l)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
