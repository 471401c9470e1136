//! Small steering problems with enumerable targets.

use super::chain::{state, Coupling};
use flowsteer::denoiser::{CouplingDataset, CouplingPair, Denoiser, ExactPosterior, Posterior};
use flowsteer::discrete::RandomStream;
use flowsteer::flow::TimeGrid;
use flowsteer::graph::FlatState;
use flowsteer::steering::{smc_run, SteeringConfig};
use flowsteer::Result;

/// Two binary dimensions from a point source; the reward is the first token.
pub fn four_state() -> (Coupling, ExactPosterior) {
    let c: Coupling = vec![
        (vec![0, 0], vec![0, 0], 0.4),
        (vec![0, 0], vec![0, 1], 0.3),
        (vec![0, 0], vec![1, 0], 0.2),
        (vec![0, 0], vec![1, 1], 0.1),
    ];
    let pairs = c.iter().map(|(a, b, w)| CouplingPair::weighted(state(a, 2), state(b, 2), *w)).collect();
    (c, ExactPosterior::new(CouplingDataset::new(pairs).unwrap()).unwrap())
}

pub fn first_token(x: &FlatState) -> f64 {
    x.tokens()[0] as f64
}

pub fn start(_: &mut RandomStream) -> Result<FlatState> {
    FlatState::sequence(2, &[0, 0])
}

/// `law * exp(lambda * first token)`, normalized.
pub fn tilted(law: &[f64], lambda: f64) -> Vec<f64> {
    let mut t: Vec<f64> = law.iter().enumerate().map(|(i, p)| p * (lambda * (i % 2) as f64).exp()).collect();
    let z: f64 = t.iter().sum();
    t.iter_mut().for_each(|p| *p /= z);
    t
}

pub fn smc_histogram(den: &dyn Denoiser, cfg: &SteeringConfig, steps: usize, runs: u64, seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(steps).unwrap();
    let mut hist = vec![0.0; 4];
    for r in 0..runs {
        let out = smc_run(&start, den, &first_token, &grid, cfg, &RandomStream::new(seed, r), None).unwrap();
        hist[out.selected_state().state_index() as usize] += 1.0 / runs as f64;
    }
    hist
}

/// Posterior that is uniform over the vocabulary whatever the state.
pub struct Uniform;

struct UniformRows;

impl Posterior for UniformRows {
    fn row(&self, _dim: usize, out: &mut [f64]) -> Result<()> {
        let p = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|v| *v = p);
        Ok(())
    }
}

impl Denoiser for Uniform {
    fn posterior<'a>(&'a self, _x: &'a FlatState, _t: f64) -> Result<Box<dyn Posterior + 'a>> {
        Ok(Box::new(UniformRows))
    }
}

/// Fraction of SMC runs on the uniform two-token model that end on token 0,
/// the only rewarded token.
pub fn two_state_frequency(cfg: &SteeringConfig, steps: usize, runs: u64, seed: u64) -> f64 {
    let grid = TimeGrid::new(steps).unwrap();
    let start = |_: &mut RandomStream| FlatState::sequence(2, &[1]);
    let reward = |x: &FlatState| if x.tokens()[0] == 0 { 1.0 } else { 0.0 };
    let mut a = 0.0;
    for r in 0..runs {
        let out = smc_run(&start, &Uniform, &reward, &grid, cfg, &RandomStream::new(seed, r), None).unwrap();
        a += reward(out.selected_state());
    }
    a / runs as f64
}
