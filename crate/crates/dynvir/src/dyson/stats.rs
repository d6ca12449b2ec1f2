//! Monte Carlo estimates with reproducible reductions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(mean: f64, se: f64) -> Self {
        Self { mean, se }
    }

    /// Independent samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        if xs.len() < 2 {
            return Self { mean, se: f64::INFINITY };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }

    /// `(mean - target) / se`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &Self) -> Self {
        Self { mean: self.mean - other.mean, se: self.se.hypot(other.se) }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mean: s * self.mean, se: s.abs() * self.se }
    }
}

/// Tree sum with a fixed split, independent of how the input was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean of a correlated chain with the standard error from `batches`
/// contiguous batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let size = xs.len() / batches.max(1);
    if size == 0 || batches < 2 {
        return Estimate::from_samples(xs);
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(|c| pairwise_sum(c) / size as f64).collect();
    let est = Estimate::from_samples(&means);
    Estimate { mean: pairwise_sum(xs) / xs.len() as f64, se: est.se }
}

/// Integrated autocorrelation time from the batch-means variance inflation.
pub fn integrated_autocorr(xs: &[f64], batches: usize) -> f64 {
    let naive = Estimate::from_samples(xs).se;
    let batched = batch_means(xs, batches).se;
    if naive > 0.0 {
        (batched / naive).powi(2)
    } else {
        1.0
    }
}

/// Bootstrap standard error of the mean.
pub fn bootstrap_se(xs: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = xs.len();
    if n < 2 || resamples < 2 {
        return f64::INFINITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let picks: Vec<f64> = (0..n).map(|_| xs[rng.random_range(0..n)]).collect();
            pairwise_sum(&picks) / n as f64
        })
        .collect();
    Estimate::from_samples(&means).se * (resamples as f64).sqrt()
}

/// Bootstrap standard errors of the column means of `rows`, all columns
/// resampled with the same replica draws.
pub fn bootstrap_se_columns(rows: &[Vec<f64>], resamples: usize, seed: u64) -> Vec<f64> {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if n < 2 || resamples < 2 {
        return vec![f64::INFINITY; width];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = vec![Vec::with_capacity(resamples); width];
    let mut acc = vec![0.0; width];
    for _ in 0..resamples {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..n {
            for (a, x) in acc.iter_mut().zip(&rows[rng.random_range(0..n)]) {
                *a += x;
            }
        }
        for (m, a) in means.iter_mut().zip(&acc) {
            m.push(a / n as f64);
        }
    }
    means.iter().map(|m| Estimate::from_samples(m).se * (resamples as f64).sqrt()).collect()
}
