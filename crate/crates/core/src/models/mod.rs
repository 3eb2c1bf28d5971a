//! Energy functions `U_θ` with exact parameter gradients.
//!
//! Every model works on whole [`Batch`]es. [`EnergyModel::forward`] returns
//! the energies together with a tape; [`EnergyModel::backward`] consumes the
//! tape and per-row upstream weights `g` and returns `∇_θ Σᵢ gᵢ U(xᵢ)`.

mod checkpoint;
mod ising;
mod mlp;
mod tabulated;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use ising::IsingEnergy;
pub use mlp::{InputEncoding, MlpEnergy, MlpSpec};
pub use tabulated::TabulatedEnergy;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::schema::{Batch, StateSchema};

pub trait EnergyModel: Send + Sync {
    /// Whatever the backward pass needs from the forward pass.
    type Tape: Send + Sync;

    fn schema(&self) -> &StateSchema;

    /// Flat parameter vector `θ`.
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, Self::Tape)>;

    /// `∇_θ Σᵢ upstream[i] · U(xᵢ)` for the batch recorded on `tape`.
    fn backward(&self, tape: &Self::Tape, upstream: &[f64]) -> Result<Vec<f64>>;

    /// Energies without keeping a tape.
    fn energy(&self, batch: &Batch) -> Result<Array1<f64>> {
        Ok(self.forward(batch)?.0)
    }

    /// Gradient of the numeric block, `∇_x U(xᵢ)` row by row.
    fn input_gradient(&self, _batch: &Batch) -> Result<Array2<f64>> {
        Err(Error::Unsupported("this model has no numeric inputs".into()))
    }

    /// Energies of every row with categorical coordinate `k` set to each of
    /// its states (`n × S_k`). Rows may be shifted by a per-row constant.
    fn site_energies(&self, batch: &Batch, k: usize) -> Result<Array2<f64>> {
        let size = self.schema().categorical_sizes()[k];
        let n = batch.len();
        let mut expanded = Batch::zeros(n * size, batch.numeric_dims(), batch.categorical_dims());
        for i in 0..n {
            for s in 0..size {
                let r = i * size + s;
                expanded.numeric.row_mut(r).assign(&batch.numeric.row(i));
                expanded.categorical.row_mut(r).assign(&batch.categorical.row(i));
                expanded.categorical[[r, k]] = s;
            }
        }
        let e = self.energy(&expanded)?;
        Ok(e.into_shape_with_order((n, size)).expect("contiguous energies"))
    }

    /// [`site_energies`](Self::site_energies) for rows whose energies
    /// `current` are already known: only the other states of `k` are
    /// evaluated and the rows are not shifted.
    fn site_energies_given(&self, batch: &Batch, k: usize, current: &[f64]) -> Result<Array2<f64>> {
        let size = self.schema().categorical_sizes()[k];
        let n = batch.len();
        if current.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: current.len(),
            });
        }
        let mut expanded = Batch::zeros(n * (size - 1), batch.numeric_dims(), batch.categorical_dims());
        let mut r = 0;
        for i in 0..n {
            let own = batch.categorical[[i, k]];
            for s in (0..size).filter(|&s| s != own) {
                expanded.numeric.row_mut(r).assign(&batch.numeric.row(i));
                expanded.categorical.row_mut(r).assign(&batch.categorical.row(i));
                expanded.categorical[[r, k]] = s;
                r += 1;
            }
        }
        let e = self.energy(&expanded)?;
        let mut out = Array2::zeros((n, size));
        let mut r = 0;
        for i in 0..n {
            let own = batch.categorical[[i, k]];
            for s in 0..size {
                if s == own {
                    out[[i, s]] = current[i];
                } else {
                    out[[i, s]] = e[r];
                    r += 1;
                }
            }
        }
        Ok(out)
    }

    /// Restore parameter constraints after an update.
    fn project(&mut self) {}
}

/// Serializable model architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Pairwise spin model `U(x) = −xᵀJx`.
    Ising,
    Mlp(MlpSpec),
    /// One free energy value per state of a tiny space.
    Tabulated,
}

/// Any of the built-in models.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Ising(IsingEnergy),
    Mlp(MlpEnergy),
    Tabulated(TabulatedEnergy),
}

pub enum AnyTape {
    Ising(<IsingEnergy as EnergyModel>::Tape),
    Mlp(<MlpEnergy as EnergyModel>::Tape),
    Tabulated(<TabulatedEnergy as EnergyModel>::Tape),
}

impl AnyModel {
    /// Freshly initialized model (zero couplings / zero table / random MLP weights).
    pub fn new(spec: &ModelSpec, schema: &StateSchema, rng: &mut StreamRng) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Ising => AnyModel::Ising(IsingEnergy::zeros(schema)?),
            ModelSpec::Mlp(s) => AnyModel::Mlp(MlpEnergy::new(schema, s.clone(), rng)?),
            ModelSpec::Tabulated => AnyModel::Tabulated(TabulatedEnergy::zeros(schema)?),
        })
    }

    /// Model with the given parameter vector.
    pub fn with_params(spec: &ModelSpec, schema: &StateSchema, params: Vec<f64>) -> Result<Self> {
        let mut model = match spec {
            ModelSpec::Ising => AnyModel::Ising(IsingEnergy::zeros(schema)?),
            ModelSpec::Mlp(s) => AnyModel::Mlp(MlpEnergy::zeros(schema, s.clone())?),
            ModelSpec::Tabulated => AnyModel::Tabulated(TabulatedEnergy::zeros(schema)?),
        };
        if params.len() != model.num_params() {
            return Err(Error::DimensionMismatch {
                expected: model.num_params(),
                got: params.len(),
            });
        }
        model.params_mut().copy_from_slice(&params);
        Ok(model)
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            AnyModel::Ising(_) => ModelSpec::Ising,
            AnyModel::Mlp(m) => ModelSpec::Mlp(m.spec().clone()),
            AnyModel::Tabulated(_) => ModelSpec::Tabulated,
        }
    }
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::Ising($m) => $body,
            AnyModel::Mlp($m) => $body,
            AnyModel::Tabulated($m) => $body,
        }
    };
}

impl EnergyModel for AnyModel {
    type Tape = AnyTape;

    fn schema(&self) -> &StateSchema {
        dispatch!(self, m => m.schema())
    }

    fn params(&self) -> &[f64] {
        dispatch!(self, m => m.params())
    }

    fn params_mut(&mut self) -> &mut [f64] {
        dispatch!(self, m => m.params_mut())
    }

    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, AnyTape)> {
        Ok(match self {
            AnyModel::Ising(m) => {
                let (e, t) = m.forward(batch)?;
                (e, AnyTape::Ising(t))
            }
            AnyModel::Mlp(m) => {
                let (e, t) = m.forward(batch)?;
                (e, AnyTape::Mlp(t))
            }
            AnyModel::Tabulated(m) => {
                let (e, t) = m.forward(batch)?;
                (e, AnyTape::Tabulated(t))
            }
        })
    }

    fn backward(&self, tape: &AnyTape, upstream: &[f64]) -> Result<Vec<f64>> {
        match (self, tape) {
            (AnyModel::Ising(m), AnyTape::Ising(t)) => m.backward(t, upstream),
            (AnyModel::Mlp(m), AnyTape::Mlp(t)) => m.backward(t, upstream),
            (AnyModel::Tabulated(m), AnyTape::Tabulated(t)) => m.backward(t, upstream),
            _ => Err(Error::InvalidConfig("tape recorded by a different model".into())),
        }
    }

    fn energy(&self, batch: &Batch) -> Result<Array1<f64>> {
        dispatch!(self, m => m.energy(batch))
    }

    fn input_gradient(&self, batch: &Batch) -> Result<Array2<f64>> {
        dispatch!(self, m => m.input_gradient(batch))
    }

    fn site_energies(&self, batch: &Batch, k: usize) -> Result<Array2<f64>> {
        dispatch!(self, m => m.site_energies(batch, k))
    }

    fn site_energies_given(&self, batch: &Batch, k: usize, current: &[f64]) -> Result<Array2<f64>> {
        dispatch!(self, m => m.site_energies_given(batch, k, current))
    }

    fn project(&mut self) {
        dispatch!(self, m => m.project())
    }
}

/// Gradient of `Σᵢ upstream[i] · U(xᵢ)` in one call.
pub fn weighted_grad<M: EnergyModel + ?Sized>(model: &M, batch: &Batch, upstream: &[f64]) -> Result<Vec<f64>> {
    let (_, tape) = model.forward(batch)?;
    model.backward(&tape, upstream)
}
