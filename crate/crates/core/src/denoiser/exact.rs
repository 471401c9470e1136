//! Bayes posterior over an enumerable coupling.

use super::{CouplingDataset, Denoiser, DenoiserOutput, Posterior};
use crate::error::{Error, Result};
use crate::graph::FlatState;

pub const MAX_EXACT_PAIRS: usize = 10_000;

/// `p(x1^i | x_t)` proportional to the sum over pairs of
/// `weight * prod_j p_t(x_t^j | x0^j, x1^j) * [x1^i]`, where each factor is
/// `(1 - t)[x_t^j = x0^j] + t[x_t^j = x1^j]`.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    data: CouplingDataset,
}

impl ExactPosterior {
    pub fn new(data: CouplingDataset) -> Result<Self> {
        if data.len() > MAX_EXACT_PAIRS {
            return Err(Error::Config(format!(
                "{} pairs exceed the exact-posterior limit of {MAX_EXACT_PAIRS}",
                data.len()
            )));
        }
        if data.uniform_layout().is_none() {
            return Err(Error::Config("exact posterior needs pairs with one common layout".into()));
        }
        Ok(Self { data })
    }

    pub fn dataset(&self) -> &CouplingDataset {
        &self.data
    }

    /// Normalized posterior weight of every pair given `x`.
    pub fn pair_weights(&self, x: &FlatState, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        if x.layout() != self.data.layout() {
            return Err(Error::DimensionMismatch { expected: self.data.layout().dims(), got: x.dims() });
        }
        let (ln_keep, ln_move) = ((1.0 - t).ln(), t.ln());
        let mut logw: Vec<f64> = self
            .data
            .pairs()
            .iter()
            .map(|p| {
                let mut lw = p.weight.ln();
                for d in 0..x.dims() {
                    let (a, b, v) = (p.source.token(d), p.target.token(d), x.token(d));
                    if a == b {
                        if v != a {
                            return f64::NEG_INFINITY;
                        }
                    } else if v == a {
                        lw += ln_keep;
                    } else if v == b {
                        lw += ln_move;
                    } else {
                        return f64::NEG_INFINITY;
                    }
                }
                lw
            })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::UnreachableState);
        }
        let mut total = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - max).exp();
            total += *w;
        }
        logw.iter_mut().for_each(|w| *w /= total);
        Ok(logw)
    }
}

struct ExactRows<'a> {
    data: &'a CouplingDataset,
    weights: Vec<f64>,
}

impl Posterior for ExactRows<'_> {
    fn row(&self, dim: usize, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (p, &w) in self.data.pairs().iter().zip(&self.weights) {
            if w > 0.0 {
                out[p.target.token(dim)] += w;
            }
        }
        Ok(())
    }
}

impl Denoiser for ExactPosterior {
    fn posterior<'a>(&'a self, x: &'a FlatState, t: f64) -> Result<Box<dyn Posterior + 'a>> {
        let weights = self.pair_weights(x, t)?;
        Ok(Box::new(ExactRows { data: &self.data, weights }))
    }
}

pub fn exact_posterior(ds: &CouplingDataset, x: &FlatState, t: f64) -> Result<DenoiserOutput> {
    ExactPosterior::new(ds.clone())?.predict(x, t)
}
