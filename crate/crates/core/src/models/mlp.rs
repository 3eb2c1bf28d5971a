//! Feed-forward energy network with hand-written backpropagation.
//!
//! Hidden layers use swish `z·σ(z)`; the output layer is linear with a
//! single unit. Inputs are the numeric block followed by either the raw
//! categorical state indices (`Raw`, e.g. bit vectors) or a learned
//! embedding row per categorical feature (`Embedding`).
//!
//! Parameters live in one flat vector: embedding tables first, then each
//! layer's weight matrix (`fan_in × fan_out`, row-major) and bias.
//! Batches are processed in fixed-size row chunks in parallel; chunk
//! gradients are summed in chunk order so results do not depend on the
//! number of threads.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EnergyModel;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::schema::{Batch, StateSchema};

/// Rows per parallel work item.
const CHUNK_ROWS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputEncoding {
    /// Categorical state indices fed in as numbers.
    Raw,
    /// A learned `width`-dimensional embedding per categorical feature.
    Embedding { width: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Widths of the hidden layers; a linear scalar output layer follows.
    pub hidden: Vec<usize>,
    pub encoding: InputEncoding,
}

impl MlpSpec {
    /// Three hidden swish layers of 256 units plus the output layer, on raw bits.
    pub fn density() -> Self {
        Self {
            hidden: vec![256, 256, 256],
            encoding: InputEncoding::Raw,
        }
    }

    /// Two hidden layers of 256 units plus the output, with 4-wide embeddings.
    pub fn tabular() -> Self {
        Self {
            hidden: vec![256, 256],
            encoding: InputEncoding::Embedding { width: 4 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpEnergy {
    schema: StateSchema,
    spec: MlpSpec,
    /// `(offset, states)` of each embedding table.
    embeddings: Vec<(usize, usize)>,
    layers: Vec<Layer>,
    theta: Vec<f64>,
    numeric: usize,
    input_dim: usize,
}

struct ChunkTape {
    start: usize,
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

pub struct MlpTape {
    rows: usize,
    categorical: Array2<usize>,
    chunks: Vec<ChunkTape>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn swish(z: f64) -> f64 {
    z * sigmoid(z)
}

fn swish_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

impl MlpEnergy {
    /// All parameters zero.
    pub fn zeros(schema: &StateSchema, spec: MlpSpec) -> Result<Self> {
        if spec.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layers must have at least one unit".into()));
        }
        let numeric = schema.numeric_dims();
        let sizes = schema.categorical_sizes();
        let mut offset = 0;
        let mut embeddings = Vec::new();
        let input_dim = match spec.encoding {
            InputEncoding::Raw => numeric + sizes.len(),
            InputEncoding::Embedding { width } => {
                if width == 0 {
                    return Err(Error::InvalidConfig("embedding width must be positive".into()));
                }
                for &s in &sizes {
                    embeddings.push((offset, s));
                    offset += s * width;
                }
                numeric + sizes.len() * width
            }
        };
        if input_dim == 0 {
            return Err(Error::InvalidConfig("the network has no inputs".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend(&spec.hidden);
        widths.push(1);
        let mut layers = Vec::new();
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w = offset;
            let b = w + fan_in * fan_out;
            offset = b + fan_out;
            layers.push(Layer { w, b, fan_in, fan_out });
        }
        Ok(Self {
            schema: schema.clone(),
            spec,
            embeddings,
            layers,
            theta: vec![0.0; offset],
            numeric,
            input_dim,
        })
    }

    /// Weights and embeddings uniform on `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(schema: &StateSchema, spec: MlpSpec, rng: &mut StreamRng) -> Result<Self> {
        let mut model = Self::zeros(schema, spec)?;
        if let InputEncoding::Embedding { width } = model.spec.encoding {
            for &(off, states) in &model.embeddings {
                let a = (6.0 / (states + width) as f64).sqrt();
                for v in &mut model.theta[off..off + states * width] {
                    *v = rng.random_range(-a..a);
                }
            }
        }
        for layer in model.layers.clone() {
            let a = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for v in &mut model.theta[layer.w..layer.b] {
                *v = rng.random_range(-a..a);
            }
        }
        Ok(model)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn weights(&self, l: &Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((l.fan_in, l.fan_out), &self.theta[l.w..l.b]).expect("weight block")
    }

    fn bias(&self, l: &Layer) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.theta[l.b..l.b + l.fan_out])
    }

    fn check(&self, batch: &Batch) -> Result<()> {
        self.schema.check_batch(batch)
    }

    fn encode(&self, batch: &Batch, start: usize, end: usize) -> Array2<f64> {
        let rows = end - start;
        let mut x = Array2::zeros((rows, self.input_dim));
        x.slice_mut(s![.., ..self.numeric])
            .assign(&batch.numeric.slice(s![start..end, ..]));
        match self.spec.encoding {
            InputEncoding::Raw => {
                let cats = batch.categorical.slice(s![start..end, ..]);
                x.slice_mut(s![.., self.numeric..]).assign(&cats.mapv(|v| v as f64));
            }
            InputEncoding::Embedding { width } => {
                for i in 0..rows {
                    for (k, &(off, _)) in self.embeddings.iter().enumerate() {
                        let state = batch.categorical[[start + i, k]];
                        let row = &self.theta[off + state * width..off + (state + 1) * width];
                        let col = self.numeric + k * width;
                        x.slice_mut(s![i, col..col + width]).assign(&ArrayView1::from(row));
                    }
                }
            }
        }
        x
    }

    fn forward_chunk(&self, batch: &Batch, start: usize, end: usize, keep: bool) -> Result<(Vec<f64>, Option<ChunkTape>)> {
        let mut a = self.encode(batch, start, end);
        let mut inputs = Vec::new();
        let mut pre = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&self.weights(layer));
            z += &self.bias(layer);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: l });
            }
            let next = if l < last { z.mapv(swish) } else { z.clone() };
            if keep {
                inputs.push(a);
                if l < last {
                    pre.push(z);
                }
            }
            a = next;
        }
        let energies = a.column(0).to_vec();
        let tape = keep.then_some(ChunkTape { start, inputs, pre });
        Ok((energies, tape))
    }

    fn chunk_bounds(n: usize) -> Vec<(usize, usize)> {
        (0..n.div_ceil(CHUNK_ROWS))
            .map(|c| (c * CHUNK_ROWS, ((c + 1) * CHUNK_ROWS).min(n)))
            .collect()
    }

    /// Gradient with respect to the first-layer input of a chunk, plus
    /// (optionally) the parameter gradient accumulated into `grad`.
    fn backward_chunk(&self, tape: &ChunkTape, upstream: &[f64], mut grad: Option<&mut [f64]>) -> Array2<f64> {
        let rows = tape.inputs[0].nrows();
        let mut delta = Array2::from_shape_vec((rows, 1), upstream.to_vec()).expect("upstream column");
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if let Some(g) = grad.as_deref_mut() {
                let mut gw = ArrayViewMut2::from_shape((layer.fan_in, layer.fan_out), &mut g[layer.w..layer.b])
                    .expect("weight block");
                general_mat_mul(1.0, &tape.inputs[l].t(), &delta, 1.0, &mut gw);
                for (gb, d) in g[layer.b..layer.b + layer.fan_out].iter_mut().zip(delta.sum_axis(Axis(0))) {
                    *gb += d;
                }
            }
            let back = delta.dot(&self.weights(layer).t());
            delta = if l > 0 {
                let mut d = back;
                d.zip_mut_with(&tape.pre[l - 1], |d, &z| *d *= swish_grad(z));
                d
            } else {
                back
            };
        }
        delta
    }

    fn scatter_embeddings(&self, categorical: &Array2<usize>, start: usize, d_input: &Array2<f64>, grad: &mut [f64]) {
        if let InputEncoding::Embedding { width } = self.spec.encoding {
            for i in 0..d_input.nrows() {
                for (k, &(off, _)) in self.embeddings.iter().enumerate() {
                    let state = categorical[[start + i, k]];
                    let col = self.numeric + k * width;
                    for c in 0..width {
                        grad[off + state * width + c] += d_input[[i, col + c]];
                    }
                }
            }
        }
    }
}

impl EnergyModel for MlpEnergy {
    type Tape = MlpTape;

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, MlpTape)> {
        self.check(batch)?;
        let parts: Vec<(Vec<f64>, Option<ChunkTape>)> = Self::chunk_bounds(batch.len())
            .into_par_iter()
            .map(|(a, b)| self.forward_chunk(batch, a, b, true))
            .collect::<Result<_>>()?;
        let mut energies = Vec::with_capacity(batch.len());
        let mut chunks = Vec::with_capacity(parts.len());
        for (e, t) in parts {
            energies.extend(e);
            chunks.push(t.expect("tape kept"));
        }
        Ok((
            Array1::from(energies),
            MlpTape {
                rows: batch.len(),
                categorical: batch.categorical.clone(),
                chunks,
            },
        ))
    }

    fn backward(&self, tape: &MlpTape, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != tape.rows {
            return Err(Error::DimensionMismatch {
                expected: tape.rows,
                got: upstream.len(),
            });
        }
        let partial: Vec<Vec<f64>> = tape
            .chunks
            .par_iter()
            .map(|chunk| {
                let rows = chunk.inputs[0].nrows();
                let mut g = vec![0.0; self.theta.len()];
                let up = &upstream[chunk.start..chunk.start + rows];
                let d_input = self.backward_chunk(chunk, up, Some(&mut g));
                self.scatter_embeddings(&tape.categorical, chunk.start, &d_input, &mut g);
                g
            })
            .collect();
        let mut grad = vec![0.0; self.theta.len()];
        for g in partial {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter gradient".into()));
        }
        Ok(grad)
    }

    fn energy(&self, batch: &Batch) -> Result<Array1<f64>> {
        self.check(batch)?;
        let parts: Vec<Vec<f64>> = Self::chunk_bounds(batch.len())
            .into_par_iter()
            .map(|(a, b)| self.forward_chunk(batch, a, b, false).map(|(e, _)| e))
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    fn input_gradient(&self, batch: &Batch) -> Result<Array2<f64>> {
        self.check(batch)?;
        let parts: Vec<Array2<f64>> = Self::chunk_bounds(batch.len())
            .into_par_iter()
            .map(|(a, b)| {
                let (_, tape) = self.forward_chunk(batch, a, b, true)?;
                let d = self.backward_chunk(&tape.expect("tape kept"), &vec![1.0; b - a], None);
                Ok(d.slice(s![.., ..self.numeric]).to_owned())
            })
            .collect::<Result<_>>()?;
        let mut out = Array2::zeros((batch.len(), self.numeric));
        for ((a, b), part) in Self::chunk_bounds(batch.len()).into_iter().zip(parts) {
            out.slice_mut(s![a..b, ..]).assign(&part);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input gradient".into()));
        }
        Ok(out)
    }
}
