//! Enumerable couplings shared by the denoiser and acceptance tests.

use super::chain::{state, Coupling};
use flowsteer::denoiser::{CouplingDataset, CouplingPair, ExactPosterior, TrainConfig};
use flowsteer::discrete::{Categorical, RandomStream};
use flowsteer::flow::{simulate_trajectory, Stepper, TimeGrid};

pub fn dataset(c: &Coupling, vocab: usize) -> CouplingDataset {
    CouplingDataset::new(c.iter().map(|(a, b, w)| CouplingPair::weighted(state(a, vocab), state(b, vocab), *w)).collect())
        .unwrap()
}

/// Long decaying-rate schedule used for the convergence checks.
pub fn convergence_config() -> TrainConfig {
    TrainConfig { epochs: 20_000, lr: 0.5, lr_decay: 0.005, ..TrainConfig::default() }
}

/// `(name, coupling, vocab)`; every state space has at most 16 elements.
pub fn toy_sets() -> Vec<(&'static str, Coupling, usize)> {
    vec![
        ("single", vec![(vec![0], vec![1], 1.0)], 2),
        ("two-pair", vec![(vec![0], vec![0], 1.0), (vec![0], vec![1], 1.0)], 2),
        (
            "two-dim",
            vec![
                (vec![0, 0], vec![0, 0], 0.4),
                (vec![0, 0], vec![0, 1], 0.3),
                (vec![0, 0], vec![1, 0], 0.2),
                (vec![0, 0], vec![1, 1], 0.1),
            ],
            2,
        ),
        (
            "mixed-sources",
            vec![
                (vec![0, 1], vec![1, 1], 1.0),
                (vec![1, 0], vec![0, 0], 2.0),
                (vec![0, 0], vec![1, 0], 1.0),
                (vec![1, 1], vec![0, 1], 0.5),
            ],
            2,
        ),
        (
            "ternary",
            vec![(vec![0, 0], vec![2, 1], 1.0), (vec![0, 0], vec![1, 2], 1.0), (vec![1, 2], vec![0, 0], 1.0)],
            3,
        ),
        (
            "four-bit",
            vec![
                (vec![0, 0, 0, 0], vec![1, 1, 0, 0], 1.0),
                (vec![0, 0, 0, 0], vec![0, 0, 1, 1], 1.0),
                (vec![0, 0, 0, 0], vec![1, 0, 1, 0], 1.0),
            ],
            2,
        ),
    ]
}

/// Empirical terminal law of `runs` exact-denoiser trajectories, each
/// starting from a source drawn by pair weight.
pub fn sampled_law(c: &Coupling, vocab: usize, steps: usize, stepper: Stepper, runs: u64, seed: u64) -> Vec<f64> {
    let den = ExactPosterior::new(dataset(c, vocab)).unwrap();
    let grid = TimeGrid::new(steps).unwrap();
    let len = c[0].0.len();
    let mut hist = vec![0.0; vocab.pow(len as u32)];
    let total_w: f64 = c.iter().map(|p| p.2).sum();
    let sources = Categorical::new(c.iter().map(|p| p.2 / total_w).collect()).unwrap();
    for r in 0..runs {
        let mut rng = RandomStream::new(seed, r);
        let x0 = state(&c[sources.sample(&mut rng)].0, vocab);
        let x1 = simulate_trajectory(&x0, &den, &grid, stepper, &mut rng, None).unwrap();
        hist[x1.state_index() as usize] += 1.0 / runs as f64;
    }
    hist
}
