//! Python bindings.
//!
//! Records cross the boundary as plain lists: categorical states as
//! `list[list[int]]` (0-based) and numeric columns as `list[list[float]]`.
//! Long-running calls release the GIL.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ebm_heat::cli::scaler_for;
use ebm_heat::datasets::{self, CodeSpec, DatasetSpec, ToyDistribution};
use ebm_heat::eval::{mmd_hamming, nll_importance, MmdConfig, MmdEstimator};
use ebm_heat::loss::EdLossConfig;
use ebm_heat::models::{read_checkpoint, write_checkpoint, Checkpoint};
use ebm_heat::optim::{Optimizer, OptimizerConfig};
use ebm_heat::samplers::{sample_chain, SamplerConfig};
use ebm_heat::train::{train, TrainConfig};
use ebm_heat::{
    build_rate_matrix, heat_kernel as kernel, AnyModel, Batch, EnergyModel, MlpSpec, ModelSpec, NumericScaler,
    PerturbationSpec, StateSchema, Streams, Structure,
};

fn to_py(e: ebm_heat::Error) -> PyErr {
    match e {
        ebm_heat::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn categorical_rows(b: &Batch) -> Vec<Vec<usize>> {
    b.categorical.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn numeric_rows(b: &Batch) -> Vec<Vec<f64>> {
    b.numeric.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_structure(s: &str) -> PyResult<Structure> {
    s.parse().map_err(to_py)
}

fn to_batch(schema: &StateSchema, categorical: Vec<Vec<usize>>, numeric: Option<Vec<Vec<f64>>>) -> PyResult<Batch> {
    let n = categorical.len().max(numeric.as_ref().map_or(0, Vec::len));
    let d_cat = schema.categorical_dims();
    let d_num = schema.numeric_dims();
    let cat = if d_cat == 0 && categorical.is_empty() {
        Array2::zeros((n, 0))
    } else {
        if categorical.iter().any(|r| r.len() != d_cat) {
            return Err(PyValueError::new_err(format!("every categorical row needs {d_cat} entries")));
        }
        Array2::from_shape_vec((categorical.len(), d_cat), categorical.concat()).map_err(|e| PyValueError::new_err(e.to_string()))?
    };
    let num = match numeric {
        None if d_num == 0 => Array2::zeros((n, 0)),
        None => return Err(PyValueError::new_err(format!("the schema has {d_num} numeric columns; pass `numeric`"))),
        Some(rows) => {
            if rows.iter().any(|r| r.len() != d_num) {
                return Err(PyValueError::new_err(format!("every numeric row needs {d_num} entries")));
            }
            Array2::from_shape_vec((rows.len(), d_num), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))?
        }
    };
    let batch = Batch::new(num, cat).map_err(to_py)?;
    schema.check_batch(&batch).map_err(to_py)?;
    Ok(batch)
}

/// Parse a perturbation name: `grid`, `flip`, `bernoulli:<eps>`,
/// `tabular:<numeric std>` or `uniform:<t>`.
pub fn parse_perturbation(s: &str) -> PyResult<PerturbationSpec> {
    let bad = || PyValueError::new_err(format!("unknown perturbation '{s}'"));
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|_| bad())?)),
        None => (s, None),
    };
    match (name, arg) {
        ("grid", None) => Ok(PerturbationSpec::grid_resample()),
        ("flip", None) => Ok(PerturbationSpec::grid_flip()),
        ("bernoulli", Some(eps)) => PerturbationSpec::bernoulli(eps).map_err(to_py),
        ("tabular", Some(std)) => Ok(PerturbationSpec::tabular_grid(std)),
        ("uniform", Some(t)) => Ok(PerturbationSpec::uniform_product(t)),
        _ => Err(bad()),
    }
}

/// Layout of a record: numeric columns followed by categorical ones.
#[pyclass(name = "Schema", module = "ebm_heat_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySchema {
    inner: StateSchema,
}

#[pymethods]
impl PySchema {
    #[staticmethod]
    fn binary(d: usize) -> Self {
        Self { inner: StateSchema::binary(d) }
    }

    #[staticmethod]
    fn spins(d: usize) -> Self {
        Self { inner: StateSchema::spins(d) }
    }

    #[staticmethod]
    fn categorical(d: usize, states: usize, structure: &str) -> PyResult<Self> {
        let inner = StateSchema::categorical(d, states, parse_structure(structure)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// The mixed schema of the ring dataset.
    #[staticmethod]
    fn ring() -> Self {
        Self { inner: datasets::ring::ring_schema() }
    }

    #[getter]
    fn numeric_dims(&self) -> usize {
        self.inner.numeric_dims()
    }

    #[getter]
    fn categorical_sizes(&self) -> Vec<usize> {
        self.inner.categorical_sizes()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema(numeric={}, categorical={:?})",
            self.inner.numeric_dims(),
            self.inner.categorical_sizes()
        )
    }
}

/// An energy model together with its optimizer state. Numeric columns are
/// standardized with statistics fixed by the first `train` call; `energy`
/// and `sample` take and return values on the original scale.
#[pyclass(name = "Model", module = "ebm_heat_py")]
struct PyModel {
    model: AnyModel,
    optimizer: Option<Optimizer>,
    step: u64,
    scaler: Option<NumericScaler>,
}

#[pymethods]
impl PyModel {
    /// Swish MLP on the schema. `hidden` defaults to three layers of 256;
    /// `embedding` switches categorical inputs to learned embeddings of that width.
    #[staticmethod]
    #[pyo3(signature = (schema, hidden = None, embedding = None, seed = 0))]
    fn mlp(schema: &PySchema, hidden: Option<Vec<usize>>, embedding: Option<usize>, seed: u64) -> PyResult<Self> {
        let mut spec = match embedding {
            Some(width) => MlpSpec {
                encoding: ebm_heat::models::InputEncoding::Embedding { width },
                ..MlpSpec::tabular()
            },
            None => MlpSpec::density(),
        };
        if let Some(h) = hidden {
            spec.hidden = h;
        }
        Self::build(&ModelSpec::Mlp(spec), &schema.inner, seed)
    }

    /// Pairwise spin model with zero couplings.
    #[staticmethod]
    fn ising(schema: &PySchema) -> PyResult<Self> {
        Self::build(&ModelSpec::Ising, &schema.inner, 0)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ckpt = read_checkpoint(std::path::Path::new(path)).map_err(to_py)?;
        Ok(Self {
            model: ckpt.model,
            optimizer: ckpt.optimizer,
            step: ckpt.step,
            scaler: ckpt.scaler,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let ckpt = Checkpoint {
            model: self.model.clone(),
            step: self.step,
            optimizer: self.optimizer.clone(),
            scaler: self.scaler.clone(),
        };
        write_checkpoint(std::path::Path::new(path), &ckpt).map_err(to_py)
    }

    #[getter]
    fn schema(&self) -> PySchema {
        PySchema {
            inner: self.model.schema().clone(),
        }
    }

    #[getter]
    fn step(&self) -> u64 {
        self.step
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    #[pyo3(signature = (categorical, numeric = None))]
    fn energy(&self, categorical: Vec<Vec<usize>>, numeric: Option<Vec<Vec<f64>>>) -> PyResult<Vec<f64>> {
        let batch = self.scaled(to_batch(self.model.schema(), categorical, numeric)?)?;
        Ok(self.model.energy(&batch).map_err(to_py)?.to_vec())
    }

    /// Train for `steps` more steps; returns the per-step losses. Repeated
    /// calls continue the same run, as if it had never been split.
    #[pyo3(signature = (categorical, numeric = None, *, steps = 1000, batch_size = 128, lr = 1e-4,
                        perturbation = "grid", negatives = 32, offset = 1.0, l1 = 0.0, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        py: Python<'_>,
        categorical: Vec<Vec<usize>>,
        numeric: Option<Vec<Vec<f64>>>,
        steps: u64,
        batch_size: usize,
        lr: f64,
        perturbation: &str,
        negatives: usize,
        offset: f64,
        l1: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let data = to_batch(self.model.schema(), categorical, numeric)?;
        if self.scaler.is_none() {
            self.scaler = scaler_for(&data).map_err(to_py)?;
        }
        let data = self.scaled(data)?;
        let cfg = TrainConfig {
            steps,
            batch_size,
            loss: EdLossConfig {
                negatives,
                offset,
                l1,
                ..EdLossConfig::new(parse_perturbation(perturbation)?)
            },
        };
        let n_params = self.model.num_params();
        let optimizer = self
            .optimizer
            .get_or_insert_with(|| Optimizer::new(OptimizerConfig::adam(lr), n_params));
        optimizer.config.lr = lr;
        let (model, start) = (&mut self.model, self.step);
        let report = py
            .detach(|| train(model, &data, &cfg, optimizer, start, Streams::new(seed).child("train"), &mut |_, _| {}))
            .map_err(to_py)?;
        self.step += steps;
        Ok(report.records.iter().map(|r| r.loss).collect())
    }

    /// Draw `n` samples; returns `(numeric, categorical)` rows.
    #[pyo3(signature = (n, *, rounds = 100, step_size = 0.01, seed = 0))]
    fn sample(&self, py: Python<'_>, n: usize, rounds: usize, step_size: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<usize>>)> {
        let cfg = SamplerConfig {
            rounds,
            step_size,
            ..SamplerConfig::default()
        };
        let model = &self.model;
        let mut batch = py
            .detach(|| sample_chain(model, &cfg, n, Streams::new(seed).child("sample")))
            .map_err(to_py)?;
        if let Some(s) = &self.scaler {
            batch = s.inverse(&batch).map_err(to_py)?;
        }
        Ok((numeric_rows(&batch), categorical_rows(&batch)))
    }

    /// Importance-sampled NLL per record; returns `(nll, standard error)`.
    #[pyo3(signature = (categorical, *, proposals = 1_000_000, seed = 0))]
    fn nll(&self, py: Python<'_>, categorical: Vec<Vec<usize>>, proposals: usize, seed: u64) -> PyResult<(f64, f64)> {
        let test = to_batch(self.model.schema(), categorical, None)?;
        let model = &self.model;
        let est = py
            .detach(|| nll_importance(model, &test, proposals, Streams::new(seed).child("nll")))
            .map_err(to_py)?;
        Ok((est.nll, est.std_error))
    }

    /// Coupling matrix of an Ising model.
    fn couplings(&self) -> PyResult<Vec<Vec<f64>>> {
        match &self.model {
            AnyModel::Ising(m) => Ok(matrix_rows(&m.couplings().to_owned())),
            _ => Err(PyValueError::new_err("only Ising models have couplings")),
        }
    }

    fn __repr__(&self) -> String {
        let kind = match &self.model {
            AnyModel::Ising(_) => "ising",
            AnyModel::Mlp(_) => "mlp",
            AnyModel::Tabulated(_) => "tabulated",
        };
        format!("Model(kind={kind}, params={}, step={})", self.model.num_params(), self.step)
    }
}

impl PyModel {
    fn scaled(&self, batch: Batch) -> PyResult<Batch> {
        match &self.scaler {
            Some(s) => s.transform(&batch).map_err(to_py),
            None => Ok(batch),
        }
    }

    fn build(spec: &ModelSpec, schema: &StateSchema, seed: u64) -> PyResult<Self> {
        let model = AnyModel::new(spec, schema, &mut Streams::new(seed).child("init").rng()).map_err(to_py)?;
        Ok(Self {
            model,
            optimizer: None,
            step: 0,
            scaler: None,
        })
    }
}

/// Closed-form heat kernel `K[b][a] = q_t(b | a)` as a list of rows.
#[pyfunction]
fn heat_kernel(structure: &str, states: usize, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let k = kernel(parse_structure(structure)?, states, t).map_err(to_py)?;
    Ok(matrix_rows(k.entries()))
}

/// Rate matrix (graph Laplacian) of a structure; columns sum to zero.
#[pyfunction]
fn rate_matrix(structure: &str, states: usize) -> PyResult<Vec<Vec<f64>>> {
    let r = build_rate_matrix(parse_structure(structure)?, states).map_err(to_py)?;
    Ok(matrix_rows(&r.entries))
}

/// Encoded toy data, e.g. `toy_dataset("2spirals", "gray16", 1000)`.
#[pyfunction]
#[pyo3(signature = (dist, code, n, seed = 0))]
fn toy_dataset(dist: &str, code: &str, n: usize, seed: u64) -> PyResult<(PySchema, Vec<Vec<usize>>)> {
    let dist: ToyDistribution = dist.parse().map_err(to_py)?;
    let code: CodeSpec = code.parse().map_err(to_py)?;
    let g = datasets::generate(&DatasetSpec::Toy { dist, code }, n, Streams::new(seed).child("data")).map_err(to_py)?;
    Ok((PySchema { inner: g.schema }, categorical_rows(&g.batch)))
}

/// Decode digit vectors back to 2D points (bin centres).
#[pyfunction]
fn decode_points(code: &str, rows: Vec<Vec<usize>>) -> PyResult<Vec<[f64; 2]>> {
    let code: CodeSpec = code.parse().map_err(to_py)?;
    rows.iter().map(|r| code.decode_point(r).map_err(to_py)).collect()
}

/// Lattice Ising samples (states 0/1 for spins −1/+1) and the true couplings.
#[pyfunction]
#[pyo3(signature = (side, sigma, n, seed = 0, gibbs_steps = 50_000))]
fn ising_dataset(py: Python<'_>, side: usize, sigma: f64, n: usize, seed: u64, gibbs_steps: usize) -> PyResult<(PySchema, Vec<Vec<usize>>, Vec<Vec<f64>>)> {
    let spec = DatasetSpec::Ising { side, sigma, gibbs_steps };
    let g = py
        .detach(|| datasets::generate(&spec, n, Streams::new(seed).child("data")))
        .map_err(to_py)?;
    let j = g.couplings.as_ref().map(matrix_rows).unwrap_or_default();
    Ok((PySchema { inner: g.schema }, categorical_rows(&g.batch), j))
}

/// Ring data; returns `(schema, numeric, categorical)`.
#[pyfunction]
#[pyo3(signature = (n, seed = 0))]
fn ring_dataset(n: usize, seed: u64) -> PyResult<(PySchema, Vec<Vec<f64>>, Vec<Vec<usize>>)> {
    let g = datasets::generate(&DatasetSpec::Ring, n, Streams::new(seed).child("data")).map_err(to_py)?;
    Ok((PySchema { inner: g.schema }, numeric_rows(&g.batch), categorical_rows(&g.batch)))
}

fn rows_to_batch(rows: Vec<Vec<usize>>) -> PyResult<Batch> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("ragged rows"));
    }
    let cat = Array2::from_shape_vec((rows.len(), width), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(Batch::from_categorical(cat))
}

/// Squared MMD with the exponential Hamming kernel.
#[pyfunction]
#[pyo3(signature = (x, y, bandwidth = 0.1, unbiased = true))]
fn mmd(x: Vec<Vec<usize>>, y: Vec<Vec<usize>>, bandwidth: f64, unbiased: bool) -> PyResult<f64> {
    let cfg = MmdConfig {
        bandwidth,
        estimator: if unbiased { MmdEstimator::Unbiased } else { MmdEstimator::Biased },
    };
    mmd_hamming(&rows_to_batch(x)?, &rows_to_batch(y)?, &cfg).map_err(to_py)
}

/// Run the command-line driver in-process; returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("ebm-heat".to_string()).chain(args).collect();
    py.detach(|| match ebm_heat::cli::main_with_args(argv) {
        Ok(_) => 0,
        Err(code) => code,
    })
}

#[pymodule]
fn ebm_heat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Add every class and function of the extension to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(rate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(toy_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(decode_points, m)?)?;
    m.add_function(wrap_pyfunction!(ising_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(ring_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
