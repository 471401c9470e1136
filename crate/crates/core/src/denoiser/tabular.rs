//! Log-linear tabular denoiser trained by softmax cross-entropy SGD.

use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::context::{Featurizer, GraphContext, Prepared, MAX_KEYS};
use super::{CouplingDataset, Denoiser, Posterior};
use crate::discrete::RandomStream;
use crate::error::{Error, Result};
use crate::flow::sample_conditional_state;
use crate::graph::{FlatState, Layout};

pub const TIME_BUCKETS: usize = 16;
pub const CHECKPOINT_FORMAT: &str = "flowsteer-tabular";
const CHECKPOINT_VERSION: u32 = 1;

/// Largest vocabulary a row can have.
const MAX_VOCAB: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Epoch `e` steps with `lr / (1 + lr_decay * e)`.
    #[serde(default)]
    pub lr_decay: f64,
    #[serde(default = "default_lambda_edge")]
    pub lambda_edge: f64,
    /// Epoch loss above `divergence_factor` times the first epoch's loss for
    /// `divergence_patience` epochs in a row aborts training.
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    #[serde(default = "default_divergence_patience")]
    pub divergence_patience: usize,
}

fn default_lambda_edge() -> f64 {
    2.0
}
fn default_divergence_factor() -> f64 {
    10.0
}
fn default_divergence_patience() -> usize {
    3
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 0.1,
            lr_decay: 0.0,
            lambda_edge: default_lambda_edge(),
            divergence_factor: default_divergence_factor(),
            divergence_patience: default_divergence_patience(),
        }
    }
}

/// Mean per-sample loss of every epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epoch_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularDenoiser {
    featurizer: Featurizer,
    node_vocab: usize,
    edge_vocab: usize,
    lambda_edge: f64,
    lr: f64,
    epochs: usize,
    curve: TrainingCurve,
    index: FxHashMap<u64, (u32, u32)>,
    params: Vec<f64>,
}

impl TabularDenoiser {
    /// An untrained model: every row is uniform.
    pub fn new(featurizer: Featurizer, node_vocab: usize, edge_vocab: usize) -> Result<Self> {
        if node_vocab == 0 || edge_vocab == 0 || node_vocab > MAX_VOCAB || edge_vocab > MAX_VOCAB {
            return Err(Error::Config(format!("vocabularies must lie in 1..={MAX_VOCAB}")));
        }
        Ok(Self {
            featurizer,
            node_vocab,
            edge_vocab,
            lambda_edge: default_lambda_edge(),
            lr: 0.0,
            epochs: 0,
            curve: TrainingCurve::default(),
            index: FxHashMap::default(),
            params: Vec::new(),
        })
    }

    pub fn featurizer(&self) -> Featurizer {
        self.featurizer
    }

    pub fn curve(&self) -> &TrainingCurve {
        &self.curve
    }

    pub fn lambda_edge(&self) -> f64 {
        self.lambda_edge
    }

    pub fn row_count(&self) -> usize {
        self.index.len()
    }

    /// Binds conditioning graphs for the graph featurizer.
    pub fn conditioned(&self, ctx: GraphContext) -> ConditionedModel<'_> {
        ConditionedModel { model: self, ctx }
    }

    fn check_layout(&self, layout: Layout) -> Result<()> {
        if layout.node_vocab != self.node_vocab || layout.edge_vocab != self.edge_vocab {
            return Err(Error::Config(format!(
                "model vocabularies ({}, {}) do not match state ({}, {})",
                self.node_vocab, self.edge_vocab, layout.node_vocab, layout.edge_vocab
            )));
        }
        Ok(())
    }

    fn prepare<'a>(&self, x: &'a FlatState, t: f64, ctx: Option<&'a GraphContext>) -> Result<Prepared<'a>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        self.check_layout(x.layout())?;
        Prepared::new(self.featurizer, x, t, TIME_BUCKETS, ctx)
    }

    /// Sums the rows of `dim`'s keys into `logits`.
    #[inline]
    fn logits(&self, prep: &Prepared<'_>, dim: usize, logits: &mut [f64]) {
        let mut keys = [0u64; MAX_KEYS];
        let k = prep.keys(dim, &mut keys);
        logits.iter_mut().for_each(|z| *z = 0.0);
        let v = logits.len();
        for key in &keys[..k] {
            if let Some(&(off, len)) = self.index.get(key) {
                debug_assert_eq!(len as usize, v);
                let row = &self.params[off as usize..off as usize + v];
                for (z, p) in logits.iter_mut().zip(row) {
                    *z += p;
                }
            }
        }
    }

    fn row_offset_or_insert(&mut self, key: u64, v: usize) -> usize {
        let next = self.params.len() as u32;
        let (off, _) = *self.index.entry(key).or_insert((next, v as u32));
        if off == next {
            self.params.extend(std::iter::repeat(0.0).take(v));
        }
        off as usize
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    /// Checkpoint text: metadata plus rows sorted by key. Reals are written in
    /// shortest round-trip form, so reloading is exact.
    pub fn to_json(&self) -> Result<String> {
        let mut keys: Vec<(&u64, &(u32, u32))> = self.index.iter().collect();
        keys.sort_unstable();
        let rows = keys
            .into_iter()
            .map(|(&key, &(off, len))| {
                let (off, len) = (off as usize, len as usize);
                RowRecord { key: format!("{key:016x}"), values: self.params[off..off + len].to_vec() }
            })
            .collect();
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            featurizer: self.featurizer,
            node_vocab: self.node_vocab,
            edge_vocab: self.edge_vocab,
            time_buckets: TIME_BUCKETS,
            lambda_edge: self.lambda_edge,
            lr: self.lr,
            epochs: self.epochs,
            curve: self.curve.clone(),
            rows,
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        if ck.time_buckets != TIME_BUCKETS {
            return Err(Error::Config(format!("checkpoint uses {} time buckets", ck.time_buckets)));
        }
        let mut m = Self::new(ck.featurizer, ck.node_vocab, ck.edge_vocab)?;
        m.lambda_edge = ck.lambda_edge;
        m.lr = ck.lr;
        m.epochs = ck.epochs;
        m.curve = ck.curve;
        for r in ck.rows {
            let key = u64::from_str_radix(&r.key, 16).map_err(|e| Error::Config(format!("bad row key {}: {e}", r.key)))?;
            if r.values.len() != m.node_vocab && r.values.len() != m.edge_vocab {
                return Err(Error::Config(format!("row {} has length {}", r.key, r.values.len())));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {} holds a non-finite logit", r.key)));
            }
            let off = m.params.len() as u32;
            if m.index.insert(key, (off, r.values.len() as u32)).is_some() {
                return Err(Error::Config(format!("duplicate row {}", r.key)));
            }
            m.params.extend(r.values);
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    featurizer: Featurizer,
    node_vocab: usize,
    edge_vocab: usize,
    time_buckets: usize,
    lambda_edge: f64,
    lr: f64,
    epochs: usize,
    curve: TrainingCurve,
    rows: Vec<RowRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowRecord {
    key: String,
    values: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
}

/// Turns logits `z` into the gradient of `-log softmax(z)[target]` with
/// respect to `z` (that is `softmax(z) - onehot(target)`) and returns the loss.
pub fn softmax_ce_gradient(z: &mut [f64], target: usize) -> f64 {
    softmax_in_place(z);
    let loss = -z[target].max(f64::MIN_POSITIVE).ln();
    z[target] -= 1.0;
    loss
}

struct TabularRows<'a> {
    model: &'a TabularDenoiser,
    prep: Prepared<'a>,
}

impl Posterior for TabularRows<'_> {
    fn row(&self, dim: usize, out: &mut [f64]) -> Result<()> {
        self.model.logits(&self.prep, dim, out);
        softmax_in_place(out);
        Ok(())
    }

    fn mode(&self, dim: usize, vocab: usize) -> Result<usize> {
        let mut buf = [0.0; MAX_VOCAB];
        let z = &mut buf[..vocab];
        self.model.logits(&self.prep, dim, z);
        Ok(crate::discrete::argmax(z))
    }
}

impl Denoiser for TabularDenoiser {
    fn posterior<'a>(&'a self, x: &'a FlatState, t: f64) -> Result<Box<dyn Posterior + 'a>> {
        let prep = self.prepare(x, t, None)?;
        Ok(Box::new(TabularRows { model: self, prep }))
    }
}

/// A graph-featurized model bound to its conditioning graphs.
#[derive(Clone, Debug)]
pub struct ConditionedModel<'m> {
    model: &'m TabularDenoiser,
    ctx: GraphContext,
}

impl ConditionedModel<'_> {
    pub fn context(&self) -> &GraphContext {
        &self.ctx
    }
}

impl Denoiser for ConditionedModel<'_> {
    fn posterior<'a>(&'a self, x: &'a FlatState, t: f64) -> Result<Box<dyn Posterior + 'a>> {
        let prep = self.model.prepare(x, t, Some(&self.ctx))?;
        Ok(Box::new(TabularRows { model: self.model, prep }))
    }
}

/// Fits a tabular model by plain SGD on the weighted cross-entropy.
///
/// Each epoch visits every pair in a shuffled order and, for every time bucket,
/// draws `t` uniformly inside the bucket and `x_t` from the conditional path.
/// Every dimension is one SGD example: logits at the current parameters, the
/// softmax-CE gradient `w (p - onehot)`, and an immediate update of the rows
/// behind the dimension's keys. Node dimensions have weight 1 and edge
/// dimensions `lambda_edge`, both scaled by the pair weight over the mean weight.
pub fn train_tabular(
    ds: &CouplingDataset,
    featurizer: Featurizer,
    cfg: &TrainConfig,
    rng: &mut RandomStream,
) -> Result<TabularDenoiser> {
    if cfg.epochs == 0 || !(cfg.lr >= 0.0) || !cfg.lr.is_finite() {
        return Err(Error::Config(format!("need positive epochs and a finite lr >= 0, got {} / {}", cfg.epochs, cfg.lr)));
    }
    if !(cfg.lr_decay >= 0.0) || !cfg.lr_decay.is_finite() {
        return Err(Error::Config(format!("lr_decay must be finite and non-negative, got {}", cfg.lr_decay)));
    }
    if !(cfg.lambda_edge >= 0.0) {
        return Err(Error::Config(format!("lambda_edge must be non-negative, got {}", cfg.lambda_edge)));
    }
    let layout = ds.layout();
    let mut model = TabularDenoiser::new(featurizer, layout.node_vocab, layout.edge_vocab)?;
    model.lambda_edge = cfg.lambda_edge;
    model.lr = cfg.lr;
    let mean_weight = ds.pairs().iter().map(|p| p.weight).sum::<f64>() / ds.len() as f64;
    let contexts: Vec<Option<GraphContext>> = ds
        .pairs()
        .iter()
        .map(|p| match featurizer {
            Featurizer::Graph => Some(GraphContext {
                source: p.source.clone(),
                product: p.product.clone().unwrap_or_else(|| p.source.clone()),
            }),
            Featurizer::Positional { .. } => None,
        })
        .collect();

    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut initial = None;
    let mut over = 0;
    let mut keys = [0u64; MAX_KEYS];
    let mut probs = [0.0f64; MAX_VOCAB];
    for epoch in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.below(i + 1);
            order.swap(i, j);
        }
        let lr = cfg.lr / (1.0 + cfg.lr_decay * epoch as f64);
        let mut total = 0.0;
        let mut samples = 0usize;
        for &pi in &order {
            let pair = &ds.pairs()[pi];
            let pw = pair.weight / mean_weight;
            let layout = pair.source.layout();
            for b in 0..TIME_BUCKETS {
                let t = (b as f64 + rng.uniform()) / TIME_BUCKETS as f64;
                let xt = sample_conditional_state(&pair.source, &pair.target, t, rng)?;
                let prep = model.prepare(&xt, t, contexts[pi].as_ref())?;
                let mut loss = 0.0;
                for d in 0..layout.dims() {
                    let v = layout.vocab(d);
                    if v == 1 {
                        continue;
                    }
                    let w = pw * if layout.is_node(d) { 1.0 } else { cfg.lambda_edge };
                    let nk = prep.keys(d, &mut keys);
                    let p = &mut probs[..v];
                    model.logits(&prep, d, p);
                    loss += w * softmax_ce_gradient(p, pair.target.token(d));
                    if w == 0.0 || lr == 0.0 {
                        continue;
                    }
                    for &key in &keys[..nk] {
                        let off = model.row_offset_or_insert(key, v);
                        for (theta, g) in model.params[off..off + v].iter_mut().zip(p.iter()) {
                            *theta -= lr * w * g;
                        }
                    }
                }
                total += loss;
                samples += 1;
            }
        }
        let mean = total / samples as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        model.curve.epoch_loss.push(mean);
        let first = *initial.get_or_insert(mean);
        if mean > cfg.divergence_factor * first {
            over += 1;
            if over >= cfg.divergence_patience {
                return Err(Error::Diverged { epoch, loss: mean });
            }
        } else {
            over = 0;
        }
        model.epochs = epoch + 1;
    }
    Ok(model)
}
