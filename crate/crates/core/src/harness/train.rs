use super::config::TrainJob;
use super::run::{flat, padded_reactants};
use crate::denoiser::{train_tabular, CouplingDataset, CouplingPair, TabularDenoiser};
use crate::discrete::RandomStream;
use crate::error::Result;
use crate::retro::{derive_synthons, read_reactions, Reaction};

/// Stream id of the training stream.
pub const TRAIN_TAG: u64 = 0x7472_6169_6e69_6e67;

/// Product-to-reactant pairs, plus synthon-to-reactant pairs on the true
/// center (conditioned on the product) when `synthon_pairs` is set.
pub fn build_coupling(reactions: &[Reaction], dummy_count: usize, synthon_pairs: bool) -> Result<CouplingDataset> {
    let mut pairs = Vec::with_capacity(reactions.len() * if synthon_pairs { 2 } else { 1 });
    for r in reactions {
        let product = flat(&r.product.pad_with_dummies(dummy_count))?;
        let target = flat(&padded_reactants(r, dummy_count)?)?;
        pairs.push(CouplingPair::new(product.clone(), target.clone()));
        if synthon_pairs {
            let synthons = flat(&derive_synthons(&r.product, r.bridge())?.pad_with_dummies(dummy_count))?;
            pairs.push(CouplingPair { source: synthons, target, weight: 1.0, product: Some(product) });
        }
    }
    CouplingDataset::new(pairs)
}

pub fn train_model(job: &TrainJob, reactions: &[Reaction]) -> Result<TabularDenoiser> {
    let ds = build_coupling(reactions, job.dummy_count, job.synthon_pairs)?;
    let mut rng = RandomStream::new(job.seed, TRAIN_TAG);
    train_tabular(&ds, job.featurizer, &job.train, &mut rng)
}

pub fn train_from_files(job: &TrainJob) -> Result<TabularDenoiser> {
    let reactions = read_reactions(&job.dataset)?;
    train_model(job, &reactions)
}
