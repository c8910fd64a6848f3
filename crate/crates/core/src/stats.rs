//! Batch-means bookkeeping shared by every Monte Carlo estimator.

use crate::sampling::{RngStream, StreamRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of batches behind every standard error.
pub const N_BATCHES: usize = 100;

/// A Monte Carlo value with its batch-based standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub n_batches: usize,
}

impl MomentEstimate {
    /// `(mean - target) / stderr`; zero stderr gives 0 on an exact hit and ±∞ otherwise.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    /// `|mean - target| <= k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    pub fn scaled(self, factor: f64) -> Self {
        MomentEstimate { mean: self.mean * factor, stderr: self.stderr * factor.abs(), ..self }
    }
}

/// Splits `n_total` samples into [`N_BATCHES`] equal batches, rounding up.
pub fn batch_layout(n_total: usize) -> (usize, usize) {
    let size = n_total.div_ceil(N_BATCHES).max(1);
    (N_BATCHES, size)
}

/// Runs `work` once per batch on its own substream of `stream` and returns the
/// results in batch order, independent of the thread count.
pub fn run_batches<T, F>(stream: RngStream, n_batches: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            work(b, &mut rng)
        })
        .collect()
}

/// Streaming mean of scalars grouped into consecutive equal batches.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_size: usize,
    sums: Vec<f64>,
    count: usize,
}

impl BatchMeans {
    pub fn new(n_batches: usize, batch_size: usize) -> Self {
        assert!(n_batches >= 2 && batch_size >= 1);
        BatchMeans { batch_size, sums: vec![0.0; n_batches], count: 0 }
    }

    /// Further pushes after `n_batches · batch_size` values are ignored.
    pub fn push(&mut self, v: f64) {
        let b = self.count / self.batch_size;
        if b < self.sums.len() {
            self.sums[b] += v;
            self.count += 1;
        }
    }

    pub fn finish(&self) -> MomentEstimate {
        let means: Vec<f64> = self.sums.iter().map(|s| s / self.batch_size as f64).collect();
        from_batch_means(&means, self.batch_size)
    }
}

/// Estimate from equally sized batch means.
pub fn from_batch_means(means: &[f64], batch_size: usize) -> MomentEstimate {
    let nb = means.len();
    let mean = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
    MomentEstimate { mean, stderr: (var / nb as f64).sqrt(), n_samples: nb * batch_size, n_batches: nb }
}

/// Per-batch sums of a fixed set of features, each batch holding `batch_size` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSums {
    pub batch_size: usize,
    pub sums: Vec<Vec<f64>>,
}

impl BatchSums {
    pub fn new(batch_size: usize, sums: Vec<Vec<f64>>) -> Self {
        assert!(sums.len() >= 2, "need at least two batches");
        let k = sums[0].len();
        assert!(sums.iter().all(|s| s.len() == k), "ragged batch sums");
        BatchSums { batch_size, sums }
    }

    pub fn n_batches(&self) -> usize {
        self.sums.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_batches() * self.batch_size
    }

    pub fn n_features(&self) -> usize {
        self.sums[0].len()
    }

    pub fn totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_features()];
        for s in &self.sums {
            t.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
        t
    }

    /// Per-sample means over all batches.
    pub fn means(&self) -> Vec<f64> {
        let n = self.n_samples() as f64;
        self.totals().into_iter().map(|t| t / n).collect()
    }

    /// Plain mean of feature `k`.
    pub fn mean(&self, k: usize) -> MomentEstimate {
        let bs = self.batch_size as f64;
        let means: Vec<f64> = self.sums.iter().map(|s| s[k] / bs).collect();
        from_batch_means(&means, self.batch_size)
    }

    /// Ratio of means `E[num] / E[den]` with a delta-method standard error
    /// built from the paired batch means.
    pub fn ratio(&self, num: usize, den: usize) -> MomentEstimate {
        let nb = self.n_batches();
        let bs = self.batch_size as f64;
        let t = self.totals();
        let r = t[num] / t[den];
        let den_mean = t[den] / self.n_samples() as f64;
        let ss: f64 = self
            .sums
            .iter()
            .map(|s| {
                let resid = (s[num] - r * s[den]) / bs;
                resid * resid
            })
            .sum();
        let var = ss / ((nb - 1) as f64 * nb as f64) / (den_mean * den_mean);
        MomentEstimate { mean: r, stderr: var.sqrt(), n_samples: self.n_samples(), n_batches: nb }
    }

    /// Delete-one-batch jackknife of a smooth statistic of the feature means.
    ///
    /// `stat` receives per-sample feature means; the point value is `stat` at
    /// the full-sample means.
    pub fn jackknife<F: Fn(&[f64]) -> f64>(&self, stat: F) -> MomentEstimate {
        let nb = self.n_batches();
        let totals = self.totals();
        let full = stat(&self.means());
        let denom = ((nb - 1) * self.batch_size) as f64;
        let mut buf = vec![0.0; totals.len()];
        let reps: Vec<f64> = self
            .sums
            .iter()
            .map(|s| {
                buf.iter_mut()
                    .zip(totals.iter().zip(s))
                    .for_each(|(o, (t, x))| *o = (t - x) / denom);
                stat(&buf)
            })
            .collect();
        let avg = reps.iter().sum::<f64>() / nb as f64;
        let var = reps.iter().map(|r| (r - avg).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
        MomentEstimate { mean: full, stderr: var.sqrt(), n_samples: self.n_samples(), n_batches: nb }
    }
}

/// Pearson correlation of paired samples.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}
