//! Finite-vocabulary probability primitives: categorical distributions,
//! reproducible random streams and the distances used to compare them.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sums within this distance of one are accepted as-is.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Sums within this distance of one are silently renormalized; anything
/// further off is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// A finite vocabulary of `size` tokens indexed `0..size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("vocabulary must be non-empty".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, token: usize) -> bool {
        token < self.size
    }
}

/// A probability vector over a finite vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Categorical::new(weights)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.weights
    }
}

impl Categorical {
    /// Validates `weights`; sums off by at most 1e-6 are renormalized.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {bad} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        let gap = (sum - 1.0).abs();
        if gap > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        if gap > NORMALIZATION_TOLERANCE {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self { weights })
    }

    /// Normalizes arbitrary non-negative weights with a positive sum.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {bad} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Self::new(weights)
    }

    /// Point mass on `token`.
    pub fn delta(size: usize, token: usize) -> Self {
        assert!(token < size, "token {token} outside vocabulary of size {size}");
        let mut weights = vec![0.0; size];
        weights[token] = 1.0;
        Self { weights }
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0);
        Self { weights: vec![1.0 / size as f64; size] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, token: usize) -> f64 {
        self.weights[token]
    }

    pub fn sample(&self, rng: &mut RandomStream) -> usize {
        sample_row(&self.weights, rng.uniform())
    }

    /// Index of the largest weight, ties toward the lowest index.
    pub fn mode(&self) -> usize {
        argmax(&self.weights)
    }
}

/// Draws `dist` once.
pub fn sample(dist: &Categorical, rng: &mut RandomStream) -> usize {
    dist.sample(rng)
}

/// Inverse-CDF lookup of `u` in `[0, 1)` against a probability row.
pub fn sample_row(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left `u` just above the accumulated mass
    last_positive
}

/// Index of the maximum entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn total_variation(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    let sum: f64 = p.weights.iter().zip(&q.weights).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    let mut kl = 0.0;
    for (i, (&a, &b)) in p.weights.iter().zip(&q.weights).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation(i));
            }
            kl += a * (a / b).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Child streams are derived from the identity of the parent, never from its
/// position, so a tree of streams yields the same draws however the consumers
/// are scheduled.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream keyed by `tag`; independent of how far `self` has advanced.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(self.seed, mix(self.stream_id, tag))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(tag.rotate_left(23) ^ 0xD1B5_4A32_D192_ED03))
}
