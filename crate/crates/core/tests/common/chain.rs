//! Exact enumeration of discretized flows on tiny sequence problems.

use flowsteer::graph::FlatState;

/// `(source, target, weight)` over sequences of one vocabulary.
pub type Coupling = Vec<(Vec<u8>, Vec<u8>, f64)>;

pub fn all_states(len: usize, vocab: usize) -> Vec<Vec<u8>> {
    let total = vocab.pow(len as u32);
    (0..total)
        .map(|mut i| {
            let mut s = vec![0u8; len];
            for d in 0..len {
                s[d] = (i % vocab) as u8;
                i /= vocab;
            }
            s
        })
        .collect()
}

/// `p(x_t | x0, x1)` under the per-dimension convex path.
pub fn path_likelihood(x: &[u8], x0: &[u8], x1: &[u8], t: f64) -> f64 {
    x.iter()
        .zip(x0.iter().zip(x1))
        .map(|(&v, (&a, &b))| (if v == a { 1.0 - t } else { 0.0 } + if v == b { t } else { 0.0 }))
        .product()
}

/// Bayes posterior rows `p(x1^d = v | x_t)`; `None` when `x` is unreachable.
pub fn posterior_rows(c: &Coupling, vocab: usize, x: &[u8], t: f64) -> Option<Vec<Vec<f64>>> {
    let mut rows = vec![vec![0.0; vocab]; x.len()];
    let mut total = 0.0;
    for (x0, x1, w) in c {
        let l = w * path_likelihood(x, x0, x1, t);
        total += l;
        for d in 0..x.len() {
            rows[d][x1[d] as usize] += l;
        }
    }
    if total <= 0.0 {
        return None;
    }
    rows.iter_mut().for_each(|r| r.iter_mut().for_each(|p| *p /= total));
    Some(rows)
}

/// Euler kernel `P(x -> y)` with jump probability `h/(1-t)` per dimension.
pub fn euler_kernel(rows: &[Vec<f64>], x: &[u8], y: &[u8], t: f64, h: f64) -> f64 {
    let p = if t + h >= 1.0 - 1e-12 { 1.0 } else { h / (1.0 - t) };
    (0..x.len())
        .map(|d| {
            let stay = if x[d] == y[d] { 1.0 - p } else { 0.0 };
            stay + p * rows[d][y[d] as usize]
        })
        .product()
}

/// Law of the Euler chain at `t = 1` on a uniform grid of `steps` intervals.
pub fn terminal_law(c: &Coupling, vocab: usize, steps: usize) -> Vec<f64> {
    let len = c[0].0.len();
    let states = all_states(len, vocab);
    let total_w: f64 = c.iter().map(|p| p.2).sum();
    let mut law = vec![0.0; states.len()];
    for (x0, _, w) in c {
        law[index(x0, vocab)] += w / total_w;
    }
    let h = 1.0 / steps as f64;
    for k in 0..steps {
        let t = k as f64 * h;
        let mut next = vec![0.0; states.len()];
        for (i, x) in states.iter().enumerate() {
            if law[i] == 0.0 {
                continue;
            }
            let rows = posterior_rows(c, vocab, x, t).expect("reachable state has a posterior");
            for (j, y) in states.iter().enumerate() {
                next[j] += law[i] * euler_kernel(&rows, x, y, t, h);
            }
        }
        law = next;
    }
    law
}

pub fn index(x: &[u8], vocab: usize) -> usize {
    x.iter().rev().fold(0, |acc, &v| acc * vocab + v as usize)
}

pub fn state(x: &[u8], vocab: usize) -> FlatState {
    FlatState::sequence(vocab, x).unwrap()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean over the time-bucket centres of the reachability-weighted per-dimension
/// `KL(exact || model)`.
pub fn mean_bucket_kl(c: &Coupling, vocab: usize, model: &dyn flowsteer::denoiser::Denoiser, buckets: usize) -> f64 {
    let len = c[0].0.len();
    let total_w: f64 = c.iter().map(|p| p.2).sum();
    let mut acc = 0.0;
    for b in 0..buckets {
        let t = (b as f64 + 0.5) / buckets as f64;
        let mut kl = 0.0;
        for x in all_states(len, vocab) {
            let mass: f64 = c.iter().map(|(x0, x1, w)| w * path_likelihood(&x, x0, x1, t)).sum::<f64>() / total_w;
            let Some(rows) = posterior_rows(c, vocab, &x, t) else { continue };
            let out = model.predict(&state(&x, vocab), t).unwrap();
            let mut per_dim = 0.0;
            for (d, row) in rows.iter().enumerate() {
                for (v, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        per_dim += p * (p / out.row(d)[v]).ln();
                    }
                }
            }
            kl += mass * per_dim / len as f64;
        }
        acc += kl;
    }
    acc / buckets as f64
}

/// Law of the two-stage chain at `t = 1`: a predictor drawn from the Euler
/// kernel, then the averaged-velocity row, with negative entries clamped and
/// the row renormalized. The last interval is a plain Euler collapse.
pub fn rk2_terminal_law(c: &Coupling, vocab: usize, steps: usize) -> Vec<f64> {
    let len = c[0].0.len();
    let states = all_states(len, vocab);
    let total_w: f64 = c.iter().map(|p| p.2).sum();
    let mut law = vec![0.0; states.len()];
    for (x0, _, w) in c {
        law[index(x0, vocab)] += w / total_w;
    }
    let h = 1.0 / steps as f64;
    for k in 0..steps {
        let t = k as f64 * h;
        let mut next = vec![0.0; states.len()];
        for (i, x) in states.iter().enumerate() {
            if law[i] == 0.0 {
                continue;
            }
            let r1 = posterior_rows(c, vocab, x, t).expect("reachable state has a posterior");
            if k + 1 == steps {
                for (j, y) in states.iter().enumerate() {
                    next[j] += law[i] * euler_kernel(&r1, x, y, t, h);
                }
                continue;
            }
            let (a, b) = (0.5 * h / (1.0 - t), 0.5 * h / (1.0 - t - h));
            for hat in &states {
                let ph = euler_kernel(&r1, x, hat, t, h);
                if ph == 0.0 {
                    continue;
                }
                let r2 = posterior_rows(c, vocab, hat, t + h).expect("predictor is reachable");
                let rows: Vec<Vec<f64>> = (0..len)
                    .map(|d| {
                        let mut row: Vec<f64> = (0..vocab)
                            .map(|v| {
                                let cur = if v == x[d] as usize { 1.0 } else { 0.0 };
                                let from_hat = if v == hat[d] as usize { 1.0 } else { 0.0 };
                                (cur + a * (r1[d][v] - cur) + b * (r2[d][v] - from_hat)).max(0.0)
                            })
                            .collect();
                        let s: f64 = row.iter().sum();
                        row.iter_mut().for_each(|p| *p /= s);
                        row
                    })
                    .collect();
                for (j, y) in states.iter().enumerate() {
                    let p: f64 = (0..len).map(|d| rows[d][y[d] as usize]).product();
                    next[j] += law[i] * ph * p;
                }
            }
        }
        law = next;
    }
    law
}

/// Normalized target marginal of a coupling.
pub fn data_law(c: &Coupling, vocab: usize) -> Vec<f64> {
    let len = c[0].0.len();
    let total_w: f64 = c.iter().map(|p| p.2).sum();
    let mut law = vec![0.0; vocab.pow(len as u32)];
    for (_, x1, w) in c {
        law[index(x1, vocab)] += w / total_w;
    }
    law
}
