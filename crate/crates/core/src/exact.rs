//! Brute-force objectives on small categorical spaces.
//!
//! Every state of the product space is enumerated (last dimension fastest),
//! so the log-partition function, the likelihood and the energy
//! discrepancy
//!
//! ```text
//! ED(U) = E_p[U(x)] − E_p E_{y~q(·|x)}[U_q(y)],  U_q(y) = −log Σ_x q(y|x) e^{−U(x)}
//! ```
//!
//! are computed exactly, along with their parameter gradients.
//!
//! The perturbation acts on the state tensor as a linear operator `K` with
//! `(Kf)(y) = Σ_x q(y|x) f(x)`. Writing `w = e^{−(U − min U)}`, the
//! derivative of ED with respect to the energy of state `z` is
//! `p(z) − w(z) · [Kᵀ(Kp / Kw)](z)`.
//!
//! In grid mode with shared negatives the training estimator conditions on
//! the perturbed coordinate, so the matching exact objective is the average
//! over coordinates of the single-coordinate discrepancies. With
//! independent negatives it is the discrepancy of the mixture kernel.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernels::TransitionKernel;
use crate::models::EnergyModel;
use crate::perturb::{GridNegatives, PerturbMode, Perturbation};
use crate::schema::{Batch, MixedSample, StateSchema};

/// Largest state space that is enumerated.
pub const MAX_EXACT_STATES: u128 = 1 << 20;

fn space_sizes(schema: &StateSchema) -> Result<(Vec<usize>, usize)> {
    if schema.numeric_dims() > 0 {
        return Err(Error::Unsupported("exact computations need an all-categorical schema".into()));
    }
    let total = schema.space_size().unwrap_or(u128::MAX);
    if total > MAX_EXACT_STATES {
        return Err(Error::SpaceTooLarge(total));
    }
    Ok((schema.categorical_sizes(), total as usize))
}

/// Every state of the space, one per row, last dimension varying fastest.
pub fn enumerate_states(schema: &StateSchema) -> Result<Batch> {
    let (sizes, total) = space_sizes(schema)?;
    let d = sizes.len();
    let mut cats = Array2::<usize>::zeros((total, d));
    for idx in 0..total {
        let mut rest = idx;
        for k in (0..d).rev() {
            cats[[idx, k]] = rest % sizes[k];
            rest /= sizes[k];
        }
    }
    Ok(Batch::from_categorical(cats))
}

/// Flat index of a state in [`enumerate_states`] order.
pub fn state_index(sizes: &[usize], state: &[usize]) -> usize {
    state.iter().zip(sizes).fold(0, |acc, (&v, &s)| acc * s + v)
}

/// `log Σ exp(vᵢ)`, shifted by the maximum.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Empirical distribution of a batch over the enumerated states.
pub fn empirical_distribution(schema: &StateSchema, data: &Batch) -> Result<Vec<f64>> {
    let (sizes, total) = space_sizes(schema)?;
    schema.check_batch(data)?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let mut p = vec![0.0; total];
    let w = 1.0 / data.len() as f64;
    for row in data.categorical.rows() {
        p[state_index(&sizes, row.as_slice().expect("standard layout"))] += w;
    }
    Ok(p)
}

/// Distribution from weighted states; weights are normalized.
pub fn weighted_distribution(schema: &StateSchema, data: &[(MixedSample, f64)]) -> Result<Vec<f64>> {
    let (sizes, total) = space_sizes(schema)?;
    let mut p = vec![0.0; total];
    let mut sum = 0.0;
    for (x, w) in data {
        schema.check_sample(x)?;
        if !(*w >= 0.0) {
            return Err(Error::InvalidConfig(format!("negative weight {w}")));
        }
        p[state_index(&sizes, &x.categorical)] += w;
        sum += w;
    }
    if !(sum > 0.0) {
        return Err(Error::InvalidConfig("weights sum to zero".into()));
    }
    p.iter_mut().for_each(|v| *v /= sum);
    Ok(p)
}

/// `log Z = log Σ_x e^{−U(x)}` over the whole space.
pub fn exact_log_partition<M: EnergyModel>(model: &M) -> Result<f64> {
    let states = enumerate_states(model.schema())?;
    let u = model.energy(&states)?;
    Ok(log_sum_exp(u.iter().map(|&e| -e)))
}

/// Exact model probabilities of every state.
pub fn exact_probabilities<M: EnergyModel>(model: &M) -> Result<Vec<f64>> {
    let states = enumerate_states(model.schema())?;
    let u = model.energy(&states)?;
    let log_z = log_sum_exp(u.iter().map(|&e| -e));
    Ok(u.iter().map(|&e| (-e - log_z).exp()).collect())
}

fn check_distribution(p: &[f64], total: usize) -> Result<()> {
    if p.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: p.len(),
        });
    }
    Ok(())
}

/// Negative log-likelihood `E_p[U] + log Z` and its gradient `E_p[∇U] − E_θ[∇U]`.
pub fn mle_nll_and_grad_exact<M: EnergyModel>(model: &M, p: &[f64]) -> Result<(f64, Vec<f64>)> {
    let states = enumerate_states(model.schema())?;
    check_distribution(p, states.len())?;
    let (u, tape) = model.forward(&states)?;
    let log_z = log_sum_exp(u.iter().map(|&e| -e));
    let nll = p.iter().zip(&u).map(|(pi, ui)| pi * ui).sum::<f64>() + log_z;
    let coeff: Vec<f64> = p.iter().zip(&u).map(|(pi, &ui)| pi - (-ui - log_z).exp()).collect();
    Ok((nll, model.backward(&tape, &coeff)?))
}

/// Apply `K` (or `Kᵀ`) of one dimension along axis `k` of a state tensor.
fn apply_axis(kernel: &TransitionKernel, sizes: &[usize], k: usize, f: &[f64], transpose: bool) -> Vec<f64> {
    let n = sizes[k];
    let inner: usize = sizes[k + 1..].iter().product();
    let outer: usize = sizes[..k].iter().product();
    let m = kernel.entries();
    let mut out = vec![0.0; f.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for b in 0..n {
            for a in 0..n {
                let q = if transpose { m[[a, b]] } else { m[[b, a]] };
                if q == 0.0 {
                    continue;
                }
                let src = &f[base + a * inner..base + (a + 1) * inner];
                let dst = &mut out[base + b * inner..base + (b + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += q * s;
                }
            }
        }
    }
    out
}

/// ED and `∂ED/∂U` for the linear perturbation operator `op` with adjoint `op_t`.
fn discrepancy(
    u: &[f64],
    p: &[f64],
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    op_t: &dyn Fn(&[f64]) -> Vec<f64>,
) -> (f64, Vec<f64>) {
    let umin = u.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = u.iter().map(|&e| (-(e - umin)).exp()).collect();
    let v = op(&w);
    let qp = op(p);
    let mut ed: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
    let mut ratio = vec![0.0; u.len()];
    for y in 0..u.len() {
        if qp[y] > 0.0 {
            ed -= qp[y] * (umin - v[y].ln());
            ratio[y] = qp[y] / v[y];
        }
    }
    let back = op_t(&ratio);
    let coeff = (0..u.len()).map(|z| p[z] - w[z] * back[z]).collect();
    (ed, coeff)
}

/// Exact energy discrepancy and its parameter gradient.
pub fn exact_ed_and_grad<M: EnergyModel>(model: &M, p: &[f64], perturbation: &Perturbation) -> Result<(f64, Vec<f64>)> {
    let states = enumerate_states(model.schema())?;
    check_distribution(p, states.len())?;
    let sizes = model.schema().categorical_sizes();
    if perturbation.schema().categorical_sizes() != sizes || perturbation.schema().numeric_dims() != 0 {
        return Err(Error::SchemaMismatch("perturbation was built for a different schema".into()));
    }
    let (u, tape) = model.forward(&states)?;
    let u = u.to_vec();
    let d = sizes.len();
    let kernels = perturbation.kernels();
    let (ed, coeff) = match (perturbation.mode(), perturbation.spec().negatives) {
        (PerturbMode::Product, _) => {
            let op = |f: &[f64]| {
                (0..d).fold(f.to_vec(), |acc, k| apply_axis(&kernels[k], &sizes, k, &acc, false))
            };
            let op_t = |f: &[f64]| {
                (0..d).fold(f.to_vec(), |acc, k| apply_axis(&kernels[k], &sizes, k, &acc, true))
            };
            discrepancy(&u, p, &op, &op_t)
        }
        (PerturbMode::Grid, GridNegatives::Shared) => {
            let mut ed = 0.0;
            let mut coeff = vec![0.0; u.len()];
            for k in 0..d {
                let op = |f: &[f64]| apply_axis(&kernels[k], &sizes, k, f, false);
                let op_t = |f: &[f64]| apply_axis(&kernels[k], &sizes, k, f, true);
                let (e, c) = discrepancy(&u, p, &op, &op_t);
                ed += e / d as f64;
                coeff.iter_mut().zip(c).for_each(|(a, b)| *a += b / d as f64);
            }
            (ed, coeff)
        }
        (PerturbMode::Grid, GridNegatives::Independent) => {
            let mix = |f: &[f64], transpose: bool| {
                let mut out = vec![0.0; f.len()];
                for k in 0..d {
                    let part = apply_axis(&kernels[k], &sizes, k, f, transpose);
                    out.iter_mut().zip(part).for_each(|(a, b)| *a += b / d as f64);
                }
                out
            };
            discrepancy(&u, p, &|f| mix(f, false), &|f| mix(f, true))
        }
    };
    Ok((ed, model.backward(&tape, &coeff)?))
}

/// Exact energy discrepancy.
pub fn exact_ed<M: EnergyModel>(model: &M, p: &[f64], perturbation: &Perturbation) -> Result<f64> {
    exact_ed_and_grad(model, p, perturbation).map(|(ed, _)| ed)
}

/// Mean negative log pseudo-likelihood `(1/d) Σ_k E_p[−log p_θ(x_k | x_¬k)]`.
pub fn pseudo_likelihood_nll<M: EnergyModel>(model: &M, p: &[f64]) -> Result<f64> {
    let states = enumerate_states(model.schema())?;
    check_distribution(p, states.len())?;
    let sizes = model.schema().categorical_sizes();
    let u = model.energy(&states)?;
    let d = sizes.len();
    let mut total = 0.0;
    for (idx, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let x = states.categorical.row(idx);
        for k in 0..d {
            let mut y = x.to_vec();
            let others: Vec<f64> = (0..sizes[k])
                .map(|s| {
                    y[k] = s;
                    -u[state_index(&sizes, &y)]
                })
                .collect();
            total += pi * (u[idx] + log_sum_exp(others)) / d as f64;
        }
    }
    Ok(total)
}
