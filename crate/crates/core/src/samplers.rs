//! Sampling from trained energies.
//!
//! Chains are stored together in a [`Batch`] so that each update is one
//! batched energy evaluation; every chain owns its random stream, so chain
//! `c` produces the same trajectory regardless of how many chains run
//! alongside it or how many threads evaluate the energies.
//!
//! A round of [`sample_chain`] is one Langevin step on the numeric block
//! followed by one Gibbs sweep over all categorical coordinates.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EnergyModel;
use crate::rng::{StreamRng, Streams};
use crate::schema::{Batch, MixedSample, StateSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    /// Coordinates `0, 1, …, d−1` every round.
    #[default]
    Sequential,
    /// A fresh random permutation every round, shared by all chains.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Langevin step size `ε`.
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub order: SweepOrder,
}

fn default_rounds() -> usize {
    100
}
fn default_step_size() -> f64 {
    0.01
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rounds: default_rounds(),
            step_size: default_step_size(),
            order: SweepOrder::Sequential,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, schema: &StateSchema) -> Result<()> {
        if schema.numeric_dims() > 0 && !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("Langevin step size {} must be positive", self.step_size)));
        }
        Ok(())
    }
}

/// Independent per-chain generators `streams.child("chain").index(c)`.
pub fn chain_rngs(streams: Streams, n: usize) -> Vec<StreamRng> {
    let base = streams.child("chain");
    (0..n).map(|c| base.index(c as u64).rng()).collect()
}

/// Draw an index from the Boltzmann weights of `energies`.
pub fn sample_boltzmann<R: Rng + ?Sized>(energies: &[f64], rng: &mut R) -> usize {
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|&e| (-(e - min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // round-off: fall back to the last state with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Resample categorical coordinate `k` of every chain from its conditional.
pub fn gibbs_site_update<M: EnergyModel>(model: &M, chains: &mut Batch, k: usize, rngs: &mut [StreamRng]) -> Result<()> {
    if k >= chains.categorical_dims() {
        return Err(Error::StateOutOfRange {
            state: k,
            size: chains.categorical_dims(),
        });
    }
    let energies = model.site_energies(chains, k)?;
    for (i, rng) in rngs.iter_mut().enumerate().take(chains.len()) {
        let row = energies.row(i);
        chains.categorical[[i, k]] = sample_boltzmann(row.as_slice().expect("contiguous row"), rng);
    }
    Ok(())
}

/// [`gibbs_site_update`] for chains whose energies `current` are known;
/// `current` is updated to the energies after the move.
pub fn gibbs_site_update_given<M: EnergyModel>(
    model: &M,
    chains: &mut Batch,
    k: usize,
    rngs: &mut [StreamRng],
    current: &mut [f64],
) -> Result<()> {
    if k >= chains.categorical_dims() {
        return Err(Error::StateOutOfRange {
            state: k,
            size: chains.categorical_dims(),
        });
    }
    let energies = model.site_energies_given(chains, k, current)?;
    for (i, rng) in rngs.iter_mut().enumerate().take(chains.len()) {
        let row = energies.row(i);
        let s = sample_boltzmann(row.as_slice().expect("contiguous row"), rng);
        chains.categorical[[i, k]] = s;
        current[i] = row[s];
    }
    Ok(())
}

/// Single-record form of [`gibbs_site_update`].
pub fn gibbs_site_update_one<M: EnergyModel>(model: &M, x: &MixedSample, k: usize, rng: &mut StreamRng) -> Result<MixedSample> {
    let mut b = Batch::from_samples(std::slice::from_ref(x))?;
    gibbs_site_update(model, &mut b, k, std::slice::from_mut(rng))?;
    Ok(b.row(0))
}

/// `x ← x − (ε/2)∇ₓU + √ε ω` on the numeric block of every chain.
pub fn langevin_step<M: EnergyModel>(model: &M, chains: &mut Batch, step_size: f64, rngs: &mut [StreamRng]) -> Result<()> {
    if chains.numeric_dims() == 0 {
        return Err(Error::Unsupported("Langevin dynamics needs numeric dimensions".into()));
    }
    if !(step_size > 0.0) {
        return Err(Error::InvalidConfig(format!("Langevin step size {step_size} must be positive")));
    }
    let grad = model.input_gradient(chains)?;
    let noise = step_size.sqrt();
    for (i, rng) in rngs.iter_mut().enumerate().take(chains.len()) {
        for j in 0..chains.numeric_dims() {
            let w: f64 = StandardNormal.sample(rng);
            chains.numeric[[i, j]] += -0.5 * step_size * grad[[i, j]] + noise * w;
        }
    }
    if chains.numeric.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Langevin state".into()));
    }
    Ok(())
}

/// Standard normal numeric block, uniform categorical states.
pub fn initial_chains(schema: &StateSchema, rngs: &mut [StreamRng]) -> Batch {
    let sizes = schema.categorical_sizes();
    let mut chains = Batch::zeros(rngs.len(), schema.numeric_dims(), sizes.len());
    for (i, rng) in rngs.iter_mut().enumerate() {
        for j in 0..schema.numeric_dims() {
            chains.numeric[[i, j]] = StandardNormal.sample(rng);
        }
        for (k, &s) in sizes.iter().enumerate() {
            chains.categorical[[i, k]] = rng.random_range(0..s);
        }
    }
    chains
}

/// Continue existing chains for `cfg.rounds` rounds.
pub fn run_rounds<M: EnergyModel>(
    model: &M,
    chains: &mut Batch,
    cfg: &SamplerConfig,
    rngs: &mut [StreamRng],
    order_rng: &mut StreamRng,
) -> Result<()> {
    let d = chains.categorical_dims();
    let mut order: Vec<usize> = (0..d).collect();
    let mut current = model.energy(chains)?.to_vec();
    for _ in 0..cfg.rounds {
        if chains.numeric_dims() > 0 {
            langevin_step(model, chains, cfg.step_size, rngs)?;
            current = model.energy(chains)?.to_vec();
        }
        if cfg.order == SweepOrder::Random {
            order.shuffle(order_rng);
        }
        for &k in &order {
            gibbs_site_update_given(model, chains, k, rngs, &mut current)?;
        }
    }
    Ok(())
}

/// Run `n` independent chains from the initial distribution and return
/// their final states.
pub fn sample_chain<M: EnergyModel>(model: &M, cfg: &SamplerConfig, n: usize, streams: Streams) -> Result<Batch> {
    cfg.validate(model.schema())?;
    let mut rngs = chain_rngs(streams, n);
    let mut chains = initial_chains(model.schema(), &mut rngs);
    let mut order_rng = streams.child("order").rng();
    run_rounds(model, &mut chains, cfg, &mut rngs, &mut order_rng)?;
    Ok(chains)
}
