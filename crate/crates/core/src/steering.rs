//! Feynman-Kac steering with sequential Monte Carlo, and the best-of-K baseline.
//!
//! Potentials: at every grid time `t < 1` a particle's log-potential is its
//! cumulative intermediate reward `S_t = sum_{s <= t} r(x_s)`; at `t = 1` it is
//! `lambda * r(x_1) - sum_{t < 1} S_t`, so the potentials along any path
//! multiply to `exp(lambda * r(x_1))`. Proposals come from the model kernel,
//! so the incremental importance weight is the potential alone.

use serde::{Deserialize, Serialize};

use crate::denoiser::{point_estimate_from, Denoiser, PointEstimate};
use crate::discrete::{sample_row, RandomStream};
use crate::error::{Error, Result};
use crate::flow::{simulate_trajectory, Stepper, TimeGrid};
use crate::graph::FlatState;

/// Terminal reward of a clean state, in `[0, 1]`.
pub trait Reward: Sync {
    fn reward(&self, x: &FlatState) -> Result<f64>;
}

impl<F: Fn(&FlatState) -> f64 + Sync> Reward for F {
    fn reward(&self, x: &FlatState) -> Result<f64> {
        Ok(self(x))
    }
}

/// Stream tags under a run stream.
const RESAMPLE_TAG: u64 = u64::MAX;
const REFRESH_TAG: u64 = u64::MAX - 1;
const SELECT_TAG: u64 = u64::MAX - 2;
const ESTIMATE_TAG: u64 = u64::MAX - 3;

#[derive(Clone, Debug)]
pub struct Particle {
    pub state: FlatState,
    pub log_weight: f64,
    pub running_reward_sum: f64,
    /// Sum of intermediate log-potentials applied along this particle's path.
    pub log_potential_sum: f64,
    pub rng: RandomStream,
    pub ancestry: Vec<usize>,
}

impl Particle {
    pub fn new(state: FlatState, rng: RandomStream) -> Self {
        Self { state, log_weight: 0.0, running_reward_sum: 0.0, log_potential_sum: 0.0, rng, ancestry: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleMode {
    #[default]
    EveryStep,
    EssThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringConfig {
    pub particles: usize,
    pub lambda: f64,
    #[serde(default)]
    pub resample: ResampleMode,
    #[serde(default = "default_ess_fraction")]
    pub ess_fraction: f64,
    #[serde(default)]
    pub stepper: Stepper,
    #[serde(default)]
    pub point_estimate: PointEstimate,
}

fn default_ess_fraction() -> f64 {
    0.5
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            particles: 4,
            lambda: 1.0,
            resample: ResampleMode::EveryStep,
            ess_fraction: default_ess_fraction(),
            stepper: Stepper::Euler,
            point_estimate: PointEstimate::Mode,
        }
    }
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("particle count must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.ess_fraction > 0.0 && self.ess_fraction <= 1.0) {
            return Err(Error::Config(format!("ess_fraction must lie in (0, 1], got {}", self.ess_fraction)));
        }
        Ok(())
    }
}

/// `r(x̂_1)` with `x̂_1` the point estimate of the denoiser at `(x, t)`; at
/// `t >= 1` the state is already clean and is scored directly.
pub fn intermediate_reward(
    den: &dyn Denoiser,
    rwd: &dyn Reward,
    x: &FlatState,
    t: f64,
    how: PointEstimate,
    rng: Option<&mut RandomStream>,
) -> Result<f64> {
    if t >= 1.0 {
        return rwd.reward(x);
    }
    let post = den.posterior(x, t)?;
    let estimate = point_estimate_from(post.as_ref(), x.layout(), how, rng)?;
    rwd.reward(&estimate)
}

/// Adds `r_t` to the running sum and applies `S_t` as the log-potential.
/// Returns the applied increment.
pub fn potential_increment(p: &mut Particle, r_t: f64) -> f64 {
    p.running_reward_sum += r_t;
    let inc = p.running_reward_sum;
    p.log_weight += inc;
    p.log_potential_sum += inc;
    inc
}

/// Applies `lambda * r_1 - sum of earlier log-potentials`. Returns the increment.
pub fn terminal_increment(p: &mut Particle, r_1: f64, lambda: f64) -> f64 {
    let inc = lambda * r_1 - p.log_potential_sum;
    p.log_weight += inc;
    inc
}

fn normalized(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(total)
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    let total = check_weights(weights)?;
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok(total * total / sq)
}

/// Systematic resampling: one uniform offset, `K` evenly spaced pointers into
/// the cumulative weights. Ancestors come out sorted.
pub fn systematic_resample(weights: &[f64], rng: &mut RandomStream) -> Result<Vec<usize>> {
    let total = check_weights(weights)?;
    let k = weights.len();
    let u0 = rng.uniform();
    let mut ancestors = Vec::with_capacity(k);
    let mut cum = weights[0] / total;
    let mut j = 0;
    for m in 0..k {
        let pos = (m as f64 + u0) / k as f64;
        while pos >= cum && j + 1 < k {
            j += 1;
            cum += weights[j] / total;
        }
        // never land on a zero-weight particle through rounding
        while weights[j] == 0.0 {
            j = if j > 0 { j - 1 } else { weights.iter().position(|&w| w > 0.0).unwrap() };
        }
        ancestors.push(j);
    }
    ancestors.sort_unstable();
    Ok(ancestors)
}

/// Per-step diagnostics of a steered run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub ess: f64,
    pub mean_reward: f64,
    pub resampled: bool,
}

#[derive(Clone, Debug)]
pub struct SmcOutcome {
    pub particles: Vec<Particle>,
    /// Normalized terminal weights.
    pub weights: Vec<f64>,
    /// Index of the particle chosen by the final weighted draw.
    pub selected: usize,
}

impl SmcOutcome {
    pub fn selected_state(&self) -> &FlatState {
        &self.particles[self.selected].state
    }
}

/// Steered sampling with `cfg.particles` particles.
///
/// Particle `m` starts from `x0_sampler` on stream `run.derive(m)`. Every
/// grid time `t < 1` (including `t = 0`) scores each particle with the
/// intermediate reward and applies its potential; particles are then
/// resampled (every step, or when the ESS drops below `ess_fraction * K`).
/// After resampling a particle keeps its stream when it is its own ancestor
/// and otherwise gets a fresh stream keyed by (step, index), so the outcome
/// does not depend on scheduling. The terminal correction is applied at
/// `t = 1` and one particle is drawn by weight.
pub fn smc_run(
    x0_sampler: &dyn Fn(&mut RandomStream) -> Result<FlatState>,
    den: &dyn Denoiser,
    rwd: &dyn Reward,
    grid: &TimeGrid,
    cfg: &SteeringConfig,
    run: &RandomStream,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<SmcOutcome> {
    cfg.validate()?;
    let k = cfg.particles;
    let mut particles = Vec::with_capacity(k);
    for m in 0..k {
        let mut rng = run.derive(m as u64);
        let x0 = x0_sampler(&mut rng)?;
        particles.push(Particle::new(x0, rng));
    }
    let estimate_root = run.derive(ESTIMATE_TAG);

    let mut step_rewards = vec![0.0; k];
    for (step, (t, h)) in grid.intervals().enumerate() {
        // one prepared posterior per particle serves both the reward and,
        // after resampling, the step of every descendant
        let states: Vec<FlatState> = particles.iter().map(|p| p.state.clone()).collect();
        let posts = states.iter().map(|x| den.posterior(x, t)).collect::<Result<Vec<_>>>()?;
        for (m, p) in particles.iter_mut().enumerate() {
            let mut est_rng = estimate_root.derive(step as u64).derive(m as u64);
            let estimate =
                point_estimate_from(posts[m].as_ref(), states[m].layout(), cfg.point_estimate, Some(&mut est_rng))?;
            let r = rwd.reward(&estimate)?;
            step_rewards[m] = r;
            potential_increment(p, r);
        }
        let log_w: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let w = normalized(&log_w)?;
        let ess = effective_sample_size(&w)?;
        let resample = match cfg.resample {
            ResampleMode::EveryStep => true,
            ResampleMode::EssThreshold => ess < cfg.ess_fraction * k as f64,
        };
        let ancestors: Vec<usize> = if resample {
            let mut rs = run.derive(RESAMPLE_TAG).derive(step as u64);
            systematic_resample(&w, &mut rs)?
        } else {
            (0..k).collect()
        };
        if let Some(tr) = trace.as_deref_mut() {
            let mean_reward = step_rewards.iter().sum::<f64>() / k as f64;
            tr.push(TraceRecord { t, ess, mean_reward, resampled: resample });
        }
        let mut next = Vec::with_capacity(k);
        for (m, &a) in ancestors.iter().enumerate() {
            let src = &particles[a];
            let mut rng = if a == m {
                src.rng.clone()
            } else {
                run.derive(REFRESH_TAG).derive(step as u64).derive(m as u64)
            };
            let state = cfg.stepper.step_with(&states[a], posts[a].as_ref(), den, t, h, &mut rng)?;
            let mut ancestry = src.ancestry.clone();
            if resample {
                ancestry.push(a);
            }
            next.push(Particle {
                state,
                log_weight: if resample { 0.0 } else { src.log_weight },
                running_reward_sum: src.running_reward_sum,
                log_potential_sum: src.log_potential_sum,
                rng,
                ancestry,
            });
        }
        drop(posts);
        particles = next;
    }

    let mut terminal = vec![0.0; k];
    for (m, p) in particles.iter_mut().enumerate() {
        let r = rwd.reward(&p.state)?;
        terminal[m] = r;
        terminal_increment(p, r, cfg.lambda);
    }
    let log_w: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let weights = normalized(&log_w)?;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(TraceRecord {
            t: 1.0,
            ess: effective_sample_size(&weights)?,
            mean_reward: terminal.iter().sum::<f64>() / k as f64,
            resampled: false,
        });
    }
    let selected = if k == 1 { 0 } else { sample_row(&weights, run.derive(SELECT_TAG).uniform()) };
    Ok(SmcOutcome { particles, weights, selected })
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub state: FlatState,
    pub index: usize,
    pub reward: f64,
    pub rewards: Vec<f64>,
}

/// `k` independent unsteered trajectories on streams `run.derive(m)`; returns
/// the one with the highest terminal reward, lowest index on ties.
pub fn greedy_baseline_run(
    x0_sampler: &dyn Fn(&mut RandomStream) -> Result<FlatState>,
    den: &dyn Denoiser,
    rwd: &dyn Reward,
    grid: &TimeGrid,
    k: usize,
    stepper: Stepper,
    run: &RandomStream,
) -> Result<GreedyOutcome> {
    if k == 0 {
        return Err(Error::Config("particle count must be at least 1".into()));
    }
    let mut best: Option<GreedyOutcome> = None;
    let mut rewards = Vec::with_capacity(k);
    for m in 0..k {
        let mut rng = run.derive(m as u64);
        let x0 = x0_sampler(&mut rng)?;
        let x1 = simulate_trajectory(&x0, den, grid, stepper, &mut rng, None)?;
        let r = rwd.reward(&x1)?;
        rewards.push(r);
        if best.as_ref().map_or(true, |b| r > b.reward) {
            best = Some(GreedyOutcome { state: x1, index: m, reward: r, rewards: Vec::new() });
        }
    }
    let mut out = best.expect("k >= 1");
    out.rewards = rewards;
    Ok(out)
}

/// Plain sampling on the same stream layout as particle 0 of a steered run.
pub fn plain_run(
    x0_sampler: &dyn Fn(&mut RandomStream) -> Result<FlatState>,
    den: &dyn Denoiser,
    grid: &TimeGrid,
    stepper: Stepper,
    run: &RandomStream,
) -> Result<FlatState> {
    let mut rng = run.derive(0);
    let x0 = x0_sampler(&mut rng)?;
    simulate_trajectory(&x0, den, grid, stepper, &mut rng, None)
}
