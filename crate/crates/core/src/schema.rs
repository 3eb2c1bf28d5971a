//! State-space schemas, single records and column-blocked batches.
//!
//! A record splits into a numeric block (`f64` per numeric dimension, in
//! schema order) and a categorical block (a 0-based state index per
//! categorical or spin dimension, in schema order). Files use 1-based
//! categorical values and `-1`/`+1` for spins; that translation lives in
//! [`crate::datasets::io`].

use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Structure;

/// One column of the state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dimension {
    Numeric {
        name: String,
    },
    Categorical {
        name: String,
        size: usize,
        structure: Structure,
    },
    /// A two-state dimension stored as `-1`/`+1` in files; state 0 is spin -1.
    Spin {
        name: String,
    },
}

impl Dimension {
    pub fn name(&self) -> &str {
        match self {
            Dimension::Numeric { name } | Dimension::Categorical { name, .. } | Dimension::Spin { name } => name,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Dimension::Numeric { .. })
    }

    /// Number of states for discrete dimensions.
    pub fn size(&self) -> Option<usize> {
        match self {
            Dimension::Numeric { .. } => None,
            Dimension::Categorical { size, .. } => Some(*size),
            Dimension::Spin { .. } => Some(2),
        }
    }

    pub fn structure(&self) -> Option<Structure> {
        match self {
            Dimension::Numeric { .. } => None,
            Dimension::Categorical { structure, .. } => Some(*structure),
            Dimension::Spin { .. } => Some(Structure::Binary),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSchema {
    pub dims: Vec<Dimension>,
}

impl StateSchema {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        for d in &dims {
            if let Dimension::Categorical { size, structure, .. } = d {
                structure.validate(*size)?;
            }
        }
        Ok(Self { dims })
    }

    /// `d` categorical dimensions of equal size and structure, named `c0..`.
    pub fn categorical(d: usize, size: usize, structure: Structure) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|k| Dimension::Categorical {
                    name: format!("c{k}"),
                    size,
                    structure,
                })
                .collect(),
        )
    }

    /// `d` binary dimensions.
    pub fn binary(d: usize) -> Self {
        Self::categorical(d, 2, Structure::Binary).expect("binary schema is always valid")
    }

    /// `d` spin dimensions.
    pub fn spins(d: usize) -> Self {
        Self {
            dims: (0..d).map(|k| Dimension::Spin { name: format!("s{k}") }).collect(),
        }
    }

    pub fn numeric_dims(&self) -> usize {
        self.dims.iter().filter(|d| d.is_numeric()).count()
    }

    pub fn categorical_dims(&self) -> usize {
        self.dims.len() - self.numeric_dims()
    }

    /// Sizes of the categorical block, in order.
    pub fn categorical_sizes(&self) -> Vec<usize> {
        self.dims.iter().filter_map(Dimension::size).collect()
    }

    pub fn categorical_structures(&self) -> Vec<Structure> {
        self.dims.iter().filter_map(Dimension::structure).collect()
    }

    /// True when every discrete dimension has two states and there is no numeric block.
    pub fn is_binary(&self) -> bool {
        self.numeric_dims() == 0 && self.categorical_sizes().iter().all(|&s| s == 2)
    }

    /// Number of states of the categorical product space, if it has no numeric block.
    pub fn space_size(&self) -> Option<u128> {
        if self.numeric_dims() > 0 {
            return None;
        }
        self.categorical_sizes()
            .iter()
            .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
    }

    pub fn check_sample(&self, x: &MixedSample) -> Result<()> {
        if x.numeric.len() != self.numeric_dims() || x.categorical.len() != self.categorical_dims() {
            return Err(Error::SchemaMismatch(format!(
                "record has {} numeric / {} categorical values, schema has {} / {}",
                x.numeric.len(),
                x.categorical.len(),
                self.numeric_dims(),
                self.categorical_dims()
            )));
        }
        for (&state, size) in x.categorical.iter().zip(self.categorical_sizes()) {
            if state >= size {
                return Err(Error::StateOutOfRange { state, size });
            }
        }
        Ok(())
    }

    pub fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.numeric.ncols() != self.numeric_dims() || batch.categorical.ncols() != self.categorical_dims() {
            return Err(Error::SchemaMismatch(format!(
                "batch has {} numeric / {} categorical columns, schema has {} / {}",
                batch.numeric.ncols(),
                batch.categorical.ncols(),
                self.numeric_dims(),
                self.categorical_dims()
            )));
        }
        for (col, size) in batch.categorical.columns().into_iter().zip(self.categorical_sizes()) {
            if let Some(&state) = col.iter().find(|&&v| v >= size) {
                return Err(Error::StateOutOfRange { state, size });
            }
        }
        Ok(())
    }
}

/// One record: numeric block plus categorical state indices (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct MixedSample {
    pub numeric: Vec<f64>,
    pub categorical: Vec<usize>,
}

impl MixedSample {
    pub fn new(numeric: Vec<f64>, categorical: Vec<usize>) -> Self {
        Self { numeric, categorical }
    }

    pub fn categorical(categorical: Vec<usize>) -> Self {
        Self {
            numeric: Vec::new(),
            categorical,
        }
    }
}

/// A batch of records stored column-blocked: `numeric` is `n x d_num`,
/// `categorical` is `n x d_cat`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub numeric: Array2<f64>,
    pub categorical: Array2<usize>,
}

impl Batch {
    pub fn new(numeric: Array2<f64>, categorical: Array2<usize>) -> Result<Self> {
        if numeric.nrows() != categorical.nrows() {
            return Err(Error::DimensionMismatch {
                expected: numeric.nrows(),
                got: categorical.nrows(),
            });
        }
        Ok(Self { numeric, categorical })
    }

    pub fn zeros(n: usize, d_num: usize, d_cat: usize) -> Self {
        Self {
            numeric: Array2::zeros((n, d_num)),
            categorical: Array2::zeros((n, d_cat)),
        }
    }

    pub fn from_categorical(categorical: Array2<usize>) -> Self {
        let n = categorical.nrows();
        Self {
            numeric: Array2::zeros((n, 0)),
            categorical,
        }
    }

    pub fn from_samples(samples: &[MixedSample]) -> Result<Self> {
        let d_num = samples.first().map_or(0, |s| s.numeric.len());
        let d_cat = samples.first().map_or(0, |s| s.categorical.len());
        let mut batch = Self::zeros(samples.len(), d_num, d_cat);
        for (i, s) in samples.iter().enumerate() {
            batch.set_row(i, s)?;
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.numeric.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn numeric_dims(&self) -> usize {
        self.numeric.ncols()
    }

    pub fn categorical_dims(&self) -> usize {
        self.categorical.ncols()
    }

    pub fn row(&self, i: usize) -> MixedSample {
        MixedSample {
            numeric: self.numeric.row(i).to_vec(),
            categorical: self.categorical.row(i).to_vec(),
        }
    }

    pub fn categorical_row(&self, i: usize) -> ArrayView1<'_, usize> {
        self.categorical.row(i)
    }

    pub fn set_row(&mut self, i: usize, x: &MixedSample) -> Result<()> {
        if x.numeric.len() != self.numeric_dims() || x.categorical.len() != self.categorical_dims() {
            return Err(Error::SchemaMismatch(format!(
                "record shape ({}, {}) does not match batch ({}, {})",
                x.numeric.len(),
                x.categorical.len(),
                self.numeric_dims(),
                self.categorical_dims()
            )));
        }
        self.numeric.row_mut(i).iter_mut().zip(&x.numeric).for_each(|(d, s)| *d = *s);
        self.categorical
            .row_mut(i)
            .iter_mut()
            .zip(&x.categorical)
            .for_each(|(d, s)| *d = *s);
        Ok(())
    }

    pub fn samples(&self) -> Vec<MixedSample> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    /// Rows `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            numeric: self.numeric.select(ndarray::Axis(0), indices),
            categorical: self.categorical.select(ndarray::Axis(0), indices),
        }
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            numeric: self.numeric.slice(s![start..end, ..]).to_owned(),
            categorical: self.categorical.slice(s![start..end, ..]).to_owned(),
        }
    }

    /// Stack batches vertically.
    pub fn concat(parts: &[Batch]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Ok(Self::zeros(0, 0, 0));
        };
        let n: usize = parts.iter().map(Batch::len).sum();
        let mut out = Self::zeros(n, first.numeric_dims(), first.categorical_dims());
        let mut at = 0;
        for p in parts {
            if p.numeric_dims() != first.numeric_dims() || p.categorical_dims() != first.categorical_dims() {
                return Err(Error::SchemaMismatch("cannot stack batches of different shape".into()));
            }
            let end = at + p.len();
            out.numeric.slice_mut(s![at..end, ..]).assign(&p.numeric);
            out.categorical.slice_mut(s![at..end, ..]).assign(&p.categorical);
            at = end;
        }
        Ok(out)
    }
}

/// Per-column affine map of the numeric block to zero mean and unit
/// variance. Models and samplers see standardized values; samples are
/// mapped back with [`NumericScaler::inverse`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NumericScaler {
    /// Fit to the numeric columns of `batch`. Constant columns keep unit scale.
    pub fn fit(batch: &Batch) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("cannot fit a numeric scaler to an empty batch".into()));
        }
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for col in batch.numeric.columns() {
            let mu = col.mean().unwrap_or(0.0);
            let sd = col.std(0.0);
            mean.push(mu);
            std.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    fn check(&self, batch: &Batch) -> Result<()> {
        if batch.numeric_dims() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: batch.numeric_dims(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, batch: &Batch) -> Result<Batch> {
        self.check(batch)?;
        let mut out = batch.clone();
        for (j, mut col) in out.numeric.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        Ok(out)
    }

    pub fn inverse(&self, batch: &Batch) -> Result<Batch> {
        self.check(batch)?;
        let mut out = batch.clone();
        for (j, mut col) in out.numeric.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_counts() {
        let schema = StateSchema::new(vec![
            Dimension::Numeric { name: "x".into() },
            Dimension::Categorical {
                name: "c".into(),
                size: 4,
                structure: Structure::Uniform,
            },
            Dimension::Spin { name: "s".into() },
        ])
        .unwrap();
        assert_eq!(schema.numeric_dims(), 1);
        assert_eq!(schema.categorical_dims(), 2);
        assert_eq!(schema.categorical_sizes(), vec![4, 2]);
        assert_eq!(schema.space_size(), None);
        assert_eq!(StateSchema::binary(10).space_size(), Some(1024));
    }

    #[test]
    fn binary_structure_rejects_wrong_size() {
        assert!(StateSchema::categorical(2, 3, Structure::Binary).is_err());
    }

    #[test]
    fn check_sample_catches_out_of_range_state() {
        let schema = StateSchema::categorical(2, 3, Structure::Uniform).unwrap();
        assert!(schema.check_sample(&MixedSample::categorical(vec![0, 2])).is_ok());
        assert!(matches!(
            schema.check_sample(&MixedSample::categorical(vec![0, 3])),
            Err(Error::StateOutOfRange { state: 3, size: 3 })
        ));
        assert!(schema.check_sample(&MixedSample::categorical(vec![0])).is_err());
    }

    #[test]
    fn batch_rows_round_trip() {
        let samples = vec![
            MixedSample::new(vec![0.5, -1.0], vec![1, 0]),
            MixedSample::new(vec![2.0, 3.0], vec![0, 3]),
        ];
        let batch = Batch::from_samples(&samples).unwrap();
        assert_eq!(batch.samples(), samples);
        let both = Batch::concat(&[batch.clone(), batch.select(&[1])]).unwrap();
        assert_eq!(both.len(), 3);
        assert_eq!(both.row(2), samples[1]);
    }
}
