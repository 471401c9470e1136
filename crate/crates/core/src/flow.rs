//! Convex probability paths, marginal velocities and CTMC simulation.

use serde::{Deserialize, Serialize};

use crate::denoiser::{Denoiser, Posterior};
use crate::discrete::{sample_row, Categorical, RandomStream};
use crate::error::{Error, Result};
use crate::graph::FlatState;

/// Steps with `h / (1 - t)` this close to one collapse onto the denoiser.
const TERMINAL_EPS: f64 = 1e-12;

/// Uniform grid `t_i = i / T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: usize,
}

impl TimeGrid {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i >= self.steps {
            1.0
        } else {
            i as f64 / self.steps as f64
        }
    }

    /// `(t_i, t_{i+1} - t_i)` for every interval.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.steps).map(move |i| {
            let t = self.time(i);
            (t, self.time(i + 1) - t)
        })
    }
}

/// Jump rates of one dimension: they sum to zero and only the current token
/// may carry a negative rate.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityRow {
    pub rates: Vec<f64>,
}

impl VelocityRow {
    pub fn sum(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// `u[x] = (p1[x] - [x = current]) / (1 - t)`.
pub fn marginal_velocity(denoised: &Categorical, current: usize, t: f64) -> Result<VelocityRow> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    if t >= 1.0 {
        return Err(Error::SingularTime(t));
    }
    if current >= denoised.len() {
        return Err(Error::DimensionMismatch { expected: denoised.len(), got: current + 1 });
    }
    let s = 1.0 / (1.0 - t);
    let rates = denoised
        .weights()
        .iter()
        .enumerate()
        .map(|(x, &p)| (p - if x == current { 1.0 } else { 0.0 }) * s)
        .collect();
    Ok(VelocityRow { rates })
}

/// Draws every dimension independently from `x0` (probability `1 - t`) or `x1`.
pub fn sample_conditional_state(x0: &FlatState, x1: &FlatState, t: f64, rng: &mut RandomStream) -> Result<FlatState> {
    if x0.layout() != x1.layout() {
        return Err(Error::DimensionMismatch { expected: x0.dims(), got: x1.dims() });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    let mut out = x0.clone();
    for (d, tok) in out.tokens_mut().iter_mut().enumerate() {
        let (a, b) = (x0.tokens()[d], x1.tokens()[d]);
        if a != b && rng.uniform() < t {
            *tok = b;
        }
    }
    Ok(out)
}

/// Probability `h / (1 - t)` that a dimension consults the denoiser this step.
fn jump_probability(t: f64, h: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    if !(h > 0.0) || t + h > 1.0 + TERMINAL_EPS {
        return Err(Error::InvalidStep { t, h });
    }
    let p = h / (1.0 - t);
    Ok(if p >= 1.0 - TERMINAL_EPS { 1.0 } else { p })
}

fn max_vocab(x: &FlatState) -> usize {
    let l = x.layout();
    l.node_vocab.max(l.edge_vocab)
}

/// One Euler step in mixture form: each dimension keeps its token with
/// probability `1 - h/(1-t)` and otherwise draws from the denoiser row.
///
/// Per dimension (in index order, skipping single-token dimensions) one
/// uniform decides whether to jump and a second one picks the new token, so
/// only jumping dimensions cost a posterior row.
pub fn euler_step(x: &FlatState, den: &dyn Denoiser, t: f64, h: f64, rng: &mut RandomStream) -> Result<FlatState> {
    jump_probability(t, h)?;
    let post = den.posterior(x, t)?;
    euler_step_with(x, post.as_ref(), t, h, rng)
}

/// [`euler_step`] with an already prepared posterior of `x` at `t`.
pub fn euler_step_with(
    x: &FlatState,
    post: &dyn Posterior,
    t: f64,
    h: f64,
    rng: &mut RandomStream,
) -> Result<FlatState> {
    let p = jump_probability(t, h)?;
    let layout = x.layout();
    let mut next = x.clone();
    let mut row = vec![0.0; max_vocab(x)];
    for d in 0..layout.dims() {
        let v = layout.vocab(d);
        if v == 1 {
            continue;
        }
        if rng.uniform() < p {
            let r = &mut row[..v];
            post.row(d, r)?;
            next.tokens_mut()[d] = sample_row(r, rng.uniform()) as u8;
        }
    }
    Ok(next)
}

/// Two-stage step: a predictor `x̂` from the Euler kernel, then a draw from
/// `δ(x_t) + h/2 u_t(·, x_t) + h/2 u_{t+h}(·, x̂)`.
///
/// Where `x̂` kept the current token the kernel is a proper mixture and is
/// sampled sparsely. Where it moved, the kernel can put negative mass on the
/// predicted token; such entries are clamped to zero and the row renormalized.
/// The terminal interval uses the exact collapse onto the denoiser.
pub fn rk2_step(x: &FlatState, den: &dyn Denoiser, t: f64, h: f64, rng: &mut RandomStream) -> Result<FlatState> {
    jump_probability(t, h)?;
    let first = den.posterior(x, t)?;
    rk2_step_with(x, first.as_ref(), den, t, h, rng)
}

pub fn rk2_step_with(
    x: &FlatState,
    first: &dyn Posterior,
    den: &dyn Denoiser,
    t: f64,
    h: f64,
    rng: &mut RandomStream,
) -> Result<FlatState> {
    if jump_probability(t, h)? >= 1.0 || t + h >= 1.0 - TERMINAL_EPS {
        return euler_step_with(x, first, t, h, rng);
    }
    let predicted = euler_step_with(x, first, t, h, rng)?;
    let second = den.posterior(&predicted, t + h)?;
    let a = 0.5 * h / (1.0 - t);
    let b = 0.5 * h / (1.0 - t - h);
    let layout = x.layout();
    let mut next = x.clone();
    let mut r1 = vec![0.0; max_vocab(x)];
    let mut r2 = vec![0.0; max_vocab(x)];
    for d in 0..layout.dims() {
        let v = layout.vocab(d);
        if v == 1 {
            continue;
        }
        let cur = x.token(d);
        let hat = predicted.token(d);
        if hat == cur {
            let u = rng.uniform();
            if u < a {
                first.row(d, &mut r1[..v])?;
                next.tokens_mut()[d] = sample_row(&r1[..v], rng.uniform()) as u8;
            } else if u < a + b {
                second.row(d, &mut r2[..v])?;
                next.tokens_mut()[d] = sample_row(&r2[..v], rng.uniform()) as u8;
            }
        } else {
            first.row(d, &mut r1[..v])?;
            second.row(d, &mut r2[..v])?;
            let w = &mut r1[..v];
            let mut total = 0.0;
            for y in 0..v {
                let stay = if y == cur { 1.0 } else { 0.0 };
                let from_hat = if y == hat { 1.0 } else { 0.0 };
                let val = stay + a * (w[y] - stay) + b * (r2[y] - from_hat);
                w[y] = val.max(0.0);
                total += w[y];
            }
            if !(total > 0.0) {
                return Err(Error::InvalidDistribution(format!("corrector row at dimension {d} vanished")));
            }
            w.iter_mut().for_each(|p| *p /= total);
            next.tokens_mut()[d] = sample_row(w, rng.uniform()) as u8;
        }
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    #[default]
    Euler,
    Rk2,
}

impl Stepper {
    pub fn step(&self, x: &FlatState, den: &dyn Denoiser, t: f64, h: f64, rng: &mut RandomStream) -> Result<FlatState> {
        match self {
            Stepper::Euler => euler_step(x, den, t, h, rng),
            Stepper::Rk2 => rk2_step(x, den, t, h, rng),
        }
    }

    /// Step reusing a posterior already prepared at `(x, t)`.
    pub fn step_with(
        &self,
        x: &FlatState,
        first: &dyn Posterior,
        den: &dyn Denoiser,
        t: f64,
        h: f64,
        rng: &mut RandomStream,
    ) -> Result<FlatState> {
        match self {
            Stepper::Euler => euler_step_with(x, first, t, h, rng),
            Stepper::Rk2 => rk2_step_with(x, first, den, t, h, rng),
        }
    }
}

impl std::str::FromStr for Stepper {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Stepper::Euler),
            "rk2" => Ok(Stepper::Rk2),
            other => Err(Error::Config(format!("unknown stepper `{other}`"))),
        }
    }
}

/// Runs `stepper` over every grid interval and returns the state at `t = 1`.
/// The recorder, when given, receives `(t, x_t)` for every grid time.
pub fn simulate_trajectory(
    x0: &FlatState,
    den: &dyn Denoiser,
    grid: &TimeGrid,
    stepper: Stepper,
    rng: &mut RandomStream,
    mut recorder: Option<&mut Vec<(f64, FlatState)>>,
) -> Result<FlatState> {
    let mut x = x0.clone();
    if let Some(rec) = recorder.as_deref_mut() {
        rec.push((0.0, x.clone()));
    }
    for (t, h) in grid.intervals() {
        x = stepper.step(&x, den, t, h, rng)?;
        if let Some(rec) = recorder.as_deref_mut() {
            rec.push((t + h, x.clone()));
        }
    }
    Ok(x)
}
