//! Lattice Ising data.
//!
//! Couplings are `J = σ·A` with `A` the adjacency matrix of a `side × side`
//! grid (4-neighbourhood, open boundary). Each sample is the final state of
//! its own Gibbs chain started from uniform spins and run for a fixed
//! number of single-site updates in systematic order, with
//! `p(s_k = +1 | rest) = logistic(4 Σ_j J_kj s_j)`.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::schema::{Batch, StateSchema};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub side: usize,
    pub sigma: f64,
}

impl IsingSpec {
    pub fn dims(&self) -> usize {
        self.side * self.side
    }

    /// Grid adjacency matrix `A`.
    pub fn adjacency(&self) -> Array2<f64> {
        let s = self.side;
        let mut a = Array2::zeros((s * s, s * s));
        for r in 0..s {
            for c in 0..s {
                let i = r * s + c;
                if c + 1 < s {
                    a[[i, i + 1]] = 1.0;
                    a[[i + 1, i]] = 1.0;
                }
                if r + 1 < s {
                    a[[i, i + s]] = 1.0;
                    a[[i + s, i]] = 1.0;
                }
            }
        }
        a
    }

    pub fn couplings(&self) -> Array2<f64> {
        self.adjacency() * self.sigma
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let a = self.adjacency();
        (0..self.dims())
            .map(|i| (0..self.dims()).filter(|&j| a[[i, j]] != 0.0).collect())
            .collect()
    }
}

/// Default chain length per sample.
pub const DEFAULT_GIBBS_STEPS: usize = 50_000;

/// `n` samples (states 0 ↔ spin −1, 1 ↔ spin +1) and the true couplings.
pub fn make_ising_dataset(spec: &IsingSpec, n: usize, gibbs_steps: usize, streams: Streams) -> Result<(StateSchema, Batch, Array2<f64>)> {
    if spec.side == 0 {
        return Err(Error::InvalidConfig("grid side must be positive".into()));
    }
    let d = spec.dims();
    let nbrs = spec.neighbours();
    let sigma = spec.sigma;
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.index(i as u64).rng();
            let mut s: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            for step in 0..gibbs_steps {
                let k = step % d;
                let field: f64 = nbrs[k].iter().map(|&j| sigma * s[j]).sum();
                let p_up = 1.0 / (1.0 + (-4.0 * field).exp());
                s[k] = if rng.random::<f64>() < p_up { 1.0 } else { -1.0 };
            }
            s.iter().map(|&v| usize::from(v > 0.0)).collect()
        })
        .collect();
    let mut cats = Array2::zeros((n, d));
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            cats[[i, j]] = v;
        }
    }
    Ok((StateSchema::spins(d), Batch::from_categorical(cats), spec.couplings()))
}
