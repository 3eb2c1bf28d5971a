//! One free energy value per state of a small categorical product space.
//!
//! States are indexed in mixed radix with the last dimension varying
//! fastest, matching [`crate::exact::enumerate_states`].

use ndarray::Array1;

use super::EnergyModel;
use crate::error::{Error, Result};
use crate::schema::{Batch, StateSchema};

/// Largest table accepted.
pub const MAX_TABLE: u128 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedEnergy {
    schema: StateSchema,
    sizes: Vec<usize>,
    table: Vec<f64>,
}

impl TabulatedEnergy {
    pub fn zeros(schema: &StateSchema) -> Result<Self> {
        let n = schema
            .space_size()
            .ok_or_else(|| Error::SchemaMismatch("a tabulated energy needs an all-categorical schema".into()))?;
        if n > MAX_TABLE {
            return Err(Error::SpaceTooLarge(n));
        }
        Ok(Self {
            schema: schema.clone(),
            sizes: schema.categorical_sizes(),
            table: vec![0.0; n as usize],
        })
    }

    pub fn from_table(schema: &StateSchema, table: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(schema)?;
        if table.len() != model.table.len() {
            return Err(Error::DimensionMismatch {
                expected: model.table.len(),
                got: table.len(),
            });
        }
        model.table = table;
        Ok(model)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Flat index of a state.
    pub fn index_of(&self, state: impl IntoIterator<Item = usize>) -> usize {
        state
            .into_iter()
            .zip(&self.sizes)
            .fold(0, |acc, (v, &s)| acc * s + v)
    }
}

impl EnergyModel for TabulatedEnergy {
    /// Flat state index of every row.
    type Tape = Vec<usize>;

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn params(&self) -> &[f64] {
        &self.table
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, Vec<usize>)> {
        self.schema.check_batch(batch)?;
        let idx: Vec<usize> = batch
            .categorical
            .rows()
            .into_iter()
            .map(|r| self.index_of(r.iter().copied()))
            .collect();
        let e = idx.iter().map(|&i| self.table[i]).collect();
        Ok((e, idx))
    }

    fn backward(&self, idx: &Vec<usize>, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != idx.len() {
            return Err(Error::DimensionMismatch {
                expected: idx.len(),
                got: upstream.len(),
            });
        }
        let mut grad = vec![0.0; self.table.len()];
        for (&i, &g) in idx.iter().zip(upstream) {
            grad[i] += g;
        }
        Ok(grad)
    }
}
