//! The stabilized Monte Carlo energy-discrepancy loss.
//!
//! For each data point `xⁱ` one perturbed point `yⁱ ~ q(·|xⁱ)` is drawn and
//! `M` negatives `x₋^{i,j}` are drawn from `yⁱ`. With `Δ_j = U(xⁱ) − U(x₋^{i,j})`
//!
//! ```text
//! L = (1/N) Σᵢ log(w + Σⱼ exp(Δⱼ)) − log M
//! ```
//!
//! evaluated with a per-datum shift `s = max(maxⱼ Δⱼ, log w)`. The gradient
//! is a single backward pass: `xⁱ` gets upstream weight `Σⱼ pⱼ / N` and
//! negative `j` gets `−pⱼ / N`, where `pⱼ = exp(Δⱼ) / (w + Σₖ exp(Δₖ))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::EnergyModel;
use crate::perturb::{Perturbation, PerturbationSpec};
use crate::rng::Streams;
use crate::schema::{Batch, MixedSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdLossConfig {
    /// Negatives per data point, `M`.
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    /// Stabilization offset `w`.
    #[serde(default = "default_offset")]
    pub offset: f64,
    pub perturbation: PerturbationSpec,
    /// Coefficient of an `l1` penalty `Σ|θ|` on all parameters.
    #[serde(default)]
    pub l1: f64,
}

fn default_negatives() -> usize {
    32
}
fn default_offset() -> f64 {
    1.0
}

impl EdLossConfig {
    pub fn new(perturbation: PerturbationSpec) -> Self {
        Self {
            negatives: default_negatives(),
            offset: default_offset(),
            perturbation,
            l1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.negatives == 0 {
            return Err(Error::InvalidConfig("at least one negative per data point is needed".into()));
        }
        if !(self.offset >= 0.0) || !self.offset.is_finite() {
            return Err(Error::InvalidConfig(format!("offset w = {} must be finite and >= 0", self.offset)));
        }
        if !(self.l1 >= 0.0) {
            return Err(Error::InvalidConfig(format!("l1 coefficient {} must be >= 0", self.l1)));
        }
        Ok(())
    }
}

/// Perturbation draws for one minibatch, frozen so that the loss becomes a
/// deterministic function of `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Draws {
    pub positives: Batch,
    /// `N · M` rows, grouped by data point.
    pub negatives: Batch,
    pub per_datum: usize,
}

/// Draw `y` and `m` negatives for every row of `data`. Datum `i` uses the
/// substream `streams.index(i)`.
pub fn draw_negatives(perturbation: &Perturbation, data: &Batch, m: usize, streams: Streams) -> Result<Draws> {
    perturbation.schema().check_batch(data)?;
    let groups: Vec<Vec<MixedSample>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.index(i as u64).rng();
            let x = data.row(i);
            let (y, dim) = perturbation.perturb(&x, &mut rng)?;
            (0..m).map(|_| perturbation.negative(&y, dim, &mut rng)).collect()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<MixedSample> = groups.into_iter().flatten().collect();
    let negatives = if flat.is_empty() {
        Batch::zeros(0, data.numeric_dims(), data.categorical_dims())
    } else {
        Batch::from_samples(&flat)?
    };
    Ok(Draws {
        positives: data.clone(),
        negatives,
        per_datum: m,
    })
}

/// Loss and upstream weights from energies: returns `(loss, g_pos, g_neg)`.
pub fn stabilized_loss(e_pos: &[f64], e_neg: &[f64], m: usize, w: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let n = e_pos.len();
    let mut g_pos = vec![0.0; n];
    let mut g_neg = vec![0.0; e_neg.len()];
    let mut total = 0.0;
    let log_w = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
    for i in 0..n {
        let negs = &e_neg[i * m..(i + 1) * m];
        let deltas: Vec<f64> = negs.iter().map(|&u| e_pos[i] - u).collect();
        let shift = deltas.iter().copied().fold(log_w, f64::max);
        let terms: Vec<f64> = deltas.iter().map(|d| (d - shift).exp()).collect();
        let denom = if w > 0.0 { w * (-shift).exp() } else { 0.0 } + terms.iter().sum::<f64>();
        total += shift + denom.ln();
        for (j, t) in terms.iter().enumerate() {
            let pj = t / denom;
            g_pos[i] += pj / n as f64;
            g_neg[i * m + j] = -pj / n as f64;
        }
    }
    (total / n as f64 - (m as f64).ln(), g_pos, g_neg)
}

fn l1_terms(params: &[f64], coeff: f64, grad: &mut [f64]) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for (g, &p) in grad.iter_mut().zip(params) {
        penalty += p.abs();
        if p != 0.0 {
            *g += coeff * p.signum();
        }
    }
    coeff * penalty
}

/// Rows of `positives ++ negatives` with repeats inside each datum's group
/// (the datum and its `M` negatives) removed, and the unique row used by
/// every original row. Grid resampling often returns the datum itself or
/// one of a handful of states, so each distinct state is evaluated once.
fn distinct_rows(draws: &Draws) -> Result<(Batch, Vec<usize>)> {
    let n = draws.positives.len();
    let m = draws.per_datum;
    let same = |a: &MixedSample, b: &MixedSample| {
        a.categorical == b.categorical && a.numeric.iter().zip(&b.numeric).all(|(u, v)| u.to_bits() == v.to_bits())
    };
    let mut rows: Vec<MixedSample> = Vec::with_capacity(n * (m + 1));
    let mut slot = vec![0usize; n * (m + 1)];
    let mut neg_slots = vec![0usize; n * m];
    for i in 0..n {
        let start = rows.len();
        let x = draws.positives.row(i);
        slot[i] = start;
        rows.push(x);
        for j in 0..m {
            let y = draws.negatives.row(i * m + j);
            let found = (start..rows.len()).find(|&u| same(&rows[u], &y));
            neg_slots[i * m + j] = match found {
                Some(u) => u,
                None => {
                    rows.push(y);
                    rows.len() - 1
                }
            };
        }
    }
    slot[n..].copy_from_slice(&neg_slots);
    Ok((Batch::from_samples(&rows)?, slot))
}

/// Loss and `θ`-gradient for fixed draws.
pub fn ed_loss_and_grad_frozen<M: EnergyModel>(model: &M, draws: &Draws, cfg: &EdLossConfig) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    let n = draws.positives.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty minibatch".into()));
    }
    let m = draws.per_datum;
    let (unique, slot) = distinct_rows(draws)?;
    let (energies, tape) = model.forward(&unique)?;
    let e = energies.as_slice().expect("contiguous energies");
    let e_pos: Vec<f64> = (0..n).map(|i| e[slot[i]]).collect();
    let e_neg: Vec<f64> = (0..n * m).map(|r| e[slot[n + r]]).collect();
    let (loss, g_pos, g_neg) = stabilized_loss(&e_pos, &e_neg, m, cfg.offset);
    let mut upstream = vec![0.0; unique.len()];
    for (s, g) in slot.iter().zip(g_pos.iter().chain(&g_neg)) {
        upstream[*s] += g;
    }
    let mut grad = model.backward(&tape, &upstream)?;
    let loss = loss + l1_terms(model.params(), cfg.l1, &mut grad);
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((loss, grad))
}

/// Draw perturbations for `batch` from `streams` and return loss and gradient.
pub fn ed_loss_and_grad<M: EnergyModel>(
    model: &M,
    batch: &Batch,
    perturbation: &Perturbation,
    cfg: &EdLossConfig,
    streams: Streams,
) -> Result<(f64, Vec<f64>)> {
    perturbation.check_for_loss()?;
    let draws = draw_negatives(perturbation, batch, cfg.negatives, streams)?;
    ed_loss_and_grad_frozen(model, &draws, cfg)
}
