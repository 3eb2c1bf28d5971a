//! Learnable Ising couplings.
//!
//! State 0 of every dimension is spin `−1`, state 1 is spin `+1`. The energy
//! is `U(s) = −sᵀJs` over the full `D × D` matrix `J`; [`EnergyModel::project`]
//! symmetrizes `J` and clears its diagonal.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::EnergyModel;
use crate::error::{Error, Result};
use crate::schema::{Batch, StateSchema};

#[derive(Clone, Debug, PartialEq)]
pub struct IsingEnergy {
    schema: StateSchema,
    dims: usize,
    /// Row-major `D × D` couplings.
    couplings: Vec<f64>,
}

impl IsingEnergy {
    pub fn zeros(schema: &StateSchema) -> Result<Self> {
        if schema.numeric_dims() > 0 || !schema.categorical_sizes().iter().all(|&s| s == 2) {
            return Err(Error::SchemaMismatch("the Ising energy needs an all-binary schema".into()));
        }
        let dims = schema.categorical_dims();
        Ok(Self {
            schema: schema.clone(),
            dims,
            couplings: vec![0.0; dims * dims],
        })
    }

    /// Model with couplings `j` (`D × D`), projected to symmetric with zero diagonal.
    pub fn from_couplings(schema: &StateSchema, j: &Array2<f64>) -> Result<Self> {
        let mut model = Self::zeros(schema)?;
        if j.dim() != (model.dims, model.dims) {
            return Err(Error::DimensionMismatch {
                expected: model.dims,
                got: j.nrows(),
            });
        }
        model.couplings = j.iter().copied().collect();
        model.project();
        Ok(model)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn couplings(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.dims, self.dims), &self.couplings).expect("square coupling matrix")
    }

    fn spins(batch: &Batch) -> Array2<f64> {
        batch.categorical.mapv(|v| if v == 0 { -1.0 } else { 1.0 })
    }

    /// Energy of one spin configuration given as `±1` values.
    pub fn energy_of_spins(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: s.len(),
            });
        }
        let j = self.couplings();
        let mut e = 0.0;
        for a in 0..self.dims {
            for b in 0..self.dims {
                e -= s[a] * j[[a, b]] * s[b];
            }
        }
        Ok(e)
    }
}

impl EnergyModel for IsingEnergy {
    /// The batch as `±1` spins.
    type Tape = Array2<f64>;

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn params(&self) -> &[f64] {
        &self.couplings
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.couplings
    }

    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, Array2<f64>)> {
        if batch.categorical_dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: batch.categorical_dims(),
            });
        }
        let s = Self::spins(batch);
        let sj = s.dot(&self.couplings());
        let e = (&sj * &s).sum_axis(Axis(1)).mapv(|v| -v);
        Ok((e, s))
    }

    fn backward(&self, s: &Array2<f64>, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != s.nrows() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                got: upstream.len(),
            });
        }
        // ∂U/∂J_ab = −s_a s_b, so the gradient is −Sᵀ diag(g) S
        let g = Array1::from(upstream.to_vec()).insert_axis(Axis(1));
        let weighted = s * &g;
        let grad = weighted.t().dot(s);
        Ok(grad.iter().map(|v| -v).collect())
    }

    /// Energies of spin `k` set to `−1` and `+1`, up to a per-row constant:
    /// `(h, −h)` with local field `h = Σ_{j≠k} (J_kj + J_jk) s_j`.
    fn site_energies(&self, batch: &Batch, k: usize) -> Result<Array2<f64>> {
        let j = self.couplings();
        let n = batch.len();
        let mut out = Array2::zeros((n, 2));
        for i in 0..n {
            let row = batch.categorical.row(i);
            let mut h = 0.0;
            for (b, &v) in row.iter().enumerate() {
                if b != k {
                    let s = if v == 0 { -1.0 } else { 1.0 };
                    h += (j[[k, b]] + j[[b, k]]) * s;
                }
            }
            out[[i, 0]] = h;
            out[[i, 1]] = -h;
        }
        Ok(out)
    }

    fn site_energies_given(&self, batch: &Batch, k: usize, current: &[f64]) -> Result<Array2<f64>> {
        if current.len() != batch.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.len(),
                got: current.len(),
            });
        }
        let mut out = self.site_energies(batch, k)?;
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let shift = current[i] - row[batch.categorical[[i, k]]];
            row += shift;
        }
        Ok(out)
    }

    fn project(&mut self) {
        let d = self.dims;
        for a in 0..d {
            self.couplings[a * d + a] = 0.0;
            for b in 0..a {
                let m = 0.5 * (self.couplings[a * d + b] + self.couplings[b * d + a]);
                self.couplings[a * d + b] = m;
                self.couplings[b * d + a] = m;
            }
        }
    }
}
