//! Negative log-likelihood of held-out data.
//!
//! `log Z` is estimated by importance sampling with a proposal that is
//! uniform on every categorical dimension (Bernoulli(½) on binary spaces).
//! Proposals are drawn in fixed-size chunks, chunk `c` from substream `c`,
//! so the estimate does not depend on how many threads evaluate energies.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exact::{exact_log_partition, log_sum_exp};
use crate::models::EnergyModel;
use crate::rng::Streams;
use crate::schema::{Batch, StateSchema};

/// Proposals drawn and evaluated at a time.
pub const PROPOSAL_CHUNK: usize = 65_536;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NllEstimate {
    /// Mean negative log-likelihood per test record, in nats.
    pub nll: f64,
    /// Delta-method standard error of the `log Z` estimate.
    pub std_error: f64,
    pub log_partition: f64,
    /// Largest single importance weight as a fraction of their sum.
    pub max_weight_fraction: f64,
}

/// `n` uniform draws from one substream.
fn draw_chunk(sizes: &[usize], n: usize, streams: Streams) -> Batch {
    let mut rng = streams.rng();
    let mut batch = Batch::zeros(n, 0, sizes.len());
    for mut row in batch.categorical.rows_mut() {
        for (v, &s) in row.iter_mut().zip(sizes) {
            *v = rng.random_range(0..s);
        }
    }
    batch
}

/// The first `n` proposals of the stream, materialized.
pub fn draw_proposals(schema: &StateSchema, n: usize, streams: Streams) -> Result<Batch> {
    check_schema(schema)?;
    let sizes = schema.categorical_sizes();
    let parts: Vec<Batch> = (0..n.div_ceil(PROPOSAL_CHUNK))
        .map(|c| draw_chunk(&sizes, PROPOSAL_CHUNK.min(n - c * PROPOSAL_CHUNK), streams.index(c as u64)))
        .collect();
    if parts.is_empty() {
        return Ok(Batch::zeros(0, 0, sizes.len()));
    }
    Batch::concat(&parts)
}

fn check_schema(schema: &StateSchema) -> Result<()> {
    if schema.numeric_dims() > 0 {
        return Err(Error::Unsupported("importance-sampled NLL needs an all-categorical space".into()));
    }
    Ok(())
}

fn mean_test_energy<M: EnergyModel>(model: &M, test: &Batch) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    model.schema().check_batch(test)?;
    let u = model.energy(test)?;
    Ok(u.sum() / test.len() as f64)
}

/// Turn log importance weights into `(log Ẑ, SE, max weight fraction)`.
fn summarize(log_w: &[f64]) -> Result<(f64, f64, f64)> {
    let n = log_w.len();
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one proposal".into()));
    }
    let lse = log_sum_exp(log_w.iter().copied());
    if !lse.is_finite() {
        return Err(Error::NonFinite("importance weights".into()));
    }
    let log_z = lse - (n as f64).ln();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Weights relative to the largest one, so everything lies in (0, 1].
    let rel: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = rel.iter().sum();
    let mean = sum / n as f64;
    let var = if n > 1 {
        rel.iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let se = var.sqrt() / ((n as f64).sqrt() * mean);
    let max_fraction = 1.0 / sum;
    if max_fraction > 0.5 {
        log::warn!("one importance weight holds {:.1}% of the total; the NLL estimate is unreliable", 100.0 * max_fraction);
    }
    Ok((log_z, se, max_fraction))
}

/// NLL from an explicit set of uniform proposals.
pub fn nll_with_proposals<M: EnergyModel>(model: &M, test: &Batch, proposals: &Batch) -> Result<NllEstimate> {
    check_schema(model.schema())?;
    model.schema().check_batch(proposals)?;
    let log_q: f64 = -model.schema().categorical_sizes().iter().map(|&s| (s as f64).ln()).sum::<f64>();
    let u = model.energy(proposals)?;
    let log_w: Vec<f64> = u.iter().map(|&e| -e - log_q).collect();
    let (log_z, se, frac) = summarize(&log_w)?;
    Ok(NllEstimate {
        nll: mean_test_energy(model, test)? + log_z,
        std_error: se,
        log_partition: log_z,
        max_weight_fraction: frac,
    })
}

/// Importance-sampled NLL with `n_proposals` draws, evaluated chunk by chunk.
pub fn nll_importance<M: EnergyModel>(model: &M, test: &Batch, n_proposals: usize, streams: Streams) -> Result<NllEstimate> {
    let schema = model.schema();
    check_schema(schema)?;
    let sizes = schema.categorical_sizes();
    let log_q: f64 = -sizes.iter().map(|&s| (s as f64).ln()).sum::<f64>();
    let mut log_w = Vec::with_capacity(n_proposals);
    for c in 0..n_proposals.div_ceil(PROPOSAL_CHUNK) {
        let n = PROPOSAL_CHUNK.min(n_proposals - c * PROPOSAL_CHUNK);
        let chunk = draw_chunk(&sizes, n, streams.index(c as u64));
        let u = model.energy(&chunk)?;
        log_w.extend(u.iter().map(|&e| -e - log_q));
    }
    let (log_z, se, frac) = summarize(&log_w)?;
    Ok(NllEstimate {
        nll: mean_test_energy(model, test)? + log_z,
        std_error: se,
        log_partition: log_z,
        max_weight_fraction: frac,
    })
}

/// NLL with `log Z` computed by enumeration.
pub fn exact_nll<M: EnergyModel>(model: &M, test: &Batch) -> Result<f64> {
    Ok(mean_test_energy(model, test)? + exact_log_partition(model)?)
}
