//! Maximum mean discrepancy with the exponential Hamming kernel
//! `k(x, y) = exp(−H(x, y) / (d · bandwidth))`.
//!
//! Pairs are first tallied into an integer histogram of Hamming distances,
//! so the estimate is independent of summation order and exactly symmetric
//! in its arguments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::Batch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MmdEstimator {
    /// V-statistic including the diagonal terms; zero for identical sets.
    Biased,
    /// U-statistic excluding the diagonal terms; can be slightly negative.
    #[default]
    Unbiased,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub bandwidth: f64,
    pub estimator: MmdEstimator,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            bandwidth: 0.1,
            estimator: MmdEstimator::Unbiased,
        }
    }
}

/// Number of ordered pairs `(a, b)` at each Hamming distance; with
/// `skip_diagonal` the pairs `a == b` (same index) are left out.
fn distance_histogram(a: &Batch, b: &Batch, skip_diagonal: bool) -> Vec<u64> {
    let d = a.categorical_dims();
    let rows: Vec<Vec<u64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut hist = vec![0u64; d + 1];
            let x = a.categorical.row(i);
            for j in 0..b.len() {
                if skip_diagonal && i == j {
                    continue;
                }
                let h = x.iter().zip(b.categorical.row(j)).filter(|(u, v)| u != v).count();
                hist[h] += 1;
            }
            hist
        })
        .collect();
    let mut total = vec![0u64; d + 1];
    for h in rows {
        for (t, v) in total.iter_mut().zip(h) {
            *t += v;
        }
    }
    total
}

fn kernel_mean(hist: &[u64], d: usize, bandwidth: f64) -> f64 {
    let count: u64 = hist.iter().sum();
    if count == 0 {
        return 0.0;
    }
    let sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(h, &c)| c as f64 * (-(h as f64) / (d as f64 * bandwidth)).exp())
        .sum();
    sum / count as f64
}

/// Squared MMD between two all-categorical samples.
pub fn mmd_hamming(x: &Batch, y: &Batch, cfg: &MmdConfig) -> Result<f64> {
    if !(cfg.bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth {} must be positive", cfg.bandwidth)));
    }
    if x.categorical_dims() != y.categorical_dims() || x.numeric_dims() != 0 || y.numeric_dims() != 0 {
        return Err(Error::SchemaMismatch("MMD needs two all-categorical samples of the same width".into()));
    }
    let d = x.categorical_dims();
    if d == 0 {
        return Err(Error::SchemaMismatch("MMD needs at least one dimension".into()));
    }
    let unbiased = cfg.estimator == MmdEstimator::Unbiased;
    if unbiased && (x.len() < 2 || y.len() < 2) {
        return Err(Error::InvalidConfig("the unbiased estimator needs at least two samples per set".into()));
    }
    let kxx = kernel_mean(&distance_histogram(x, x, unbiased), d, cfg.bandwidth);
    let kyy = kernel_mean(&distance_histogram(y, y, unbiased), d, cfg.bandwidth);
    let kxy = kernel_mean(&distance_histogram(x, y, false), d, cfg.bandwidth);
    Ok(kxx + kyy - 2.0 * kxy)
}
