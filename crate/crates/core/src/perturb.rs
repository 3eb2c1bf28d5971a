//! Perturbations `q_t(y | x)` of mixed records.
//!
//! Categorical coordinates move under per-dimension heat kernels, numeric
//! coordinates receive isotropic Gaussian noise. In [`PerturbMode::Product`]
//! every categorical coordinate is perturbed independently; in
//! [`PerturbMode::Grid`] a single uniformly chosen categorical coordinate is
//! perturbed and the rest are copied.
//!
//! A [`PerturbationSpec`] is a serializable description. [`Perturbation`]
//! binds it to a schema and precomputes one kernel per distinct
//! `(structure, S, t, form)`, shared between dimensions.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_rate_matrix, euler_kernel, heat_kernel, sample_gaussian_limit, KernelForm, Structure, TransitionKernel};
use crate::schema::{MixedSample, StateSchema};

/// How the base time of a dimension scales with its state count `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeScaling {
    /// `t = t_base`
    #[default]
    Fixed,
    /// `t = S · t_base`
    Linear,
    /// `t = S² · t_base`
    Quadratic,
}

impl TimeScaling {
    pub fn apply(&self, base: f64, states: usize) -> f64 {
        let s = states as f64;
        match self {
            TimeScaling::Fixed => base,
            TimeScaling::Linear => s * base,
            TimeScaling::Quadratic => s * s * base,
        }
    }
}

/// How categorical draws are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalSampler {
    /// Inverse CDF of the kernel column.
    #[default]
    Kernel,
    /// Discretized wrapped/reflected Gaussian; requires quadratic scaling and
    /// a cyclic or ordinal structure.
    GaussianLimit,
}

/// Perturbation of one categorical dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalPerturbation {
    /// Overrides the structure recorded in the schema.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Structure>,
    pub base_time: f64,
    #[serde(default)]
    pub scaling: TimeScaling,
    #[serde(default)]
    pub form: KernelForm,
    #[serde(default)]
    pub sampler: CategoricalSampler,
}

impl CategoricalPerturbation {
    pub fn new(base_time: f64) -> Self {
        Self {
            structure: None,
            base_time,
            scaling: TimeScaling::Fixed,
            form: KernelForm::Exact,
            sampler: CategoricalSampler::Kernel,
        }
    }

    pub fn with_structure(mut self, structure: Structure) -> Self {
        self.structure = Some(structure);
        self
    }

    pub fn with_scaling(mut self, scaling: TimeScaling) -> Self {
        self.scaling = scaling;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    #[default]
    Product,
    Grid,
}

/// Where grid-mode negatives are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridNegatives {
    /// Re-perturb the coordinate that produced `y`.
    #[default]
    Shared,
    /// Draw a fresh coordinate for every negative (the full mixture kernel).
    Independent,
}

/// Serializable perturbation description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub mode: PerturbMode,
    #[serde(default)]
    pub negatives: GridNegatives,
    /// One entry per categorical dimension, or a single entry applied to all.
    pub categorical: Vec<CategoricalPerturbation>,
    /// Standard deviation of the Gaussian noise on numeric coordinates.
    #[serde(default)]
    pub numeric_std: f64,
}

/// `t` such that a binary heat kernel flips with probability `eps`.
pub fn bernoulli_time(eps: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::ProbabilityOutOfRange(eps));
    }
    Ok(-0.5 * (1.0 - 2.0 * eps).ln())
}

/// Flip probability of the binary heat kernel at time `t`.
pub fn bernoulli_epsilon(t: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * t).exp())
}

impl PerturbationSpec {
    /// Same kernel on every categorical dimension.
    pub fn uniform_product(base_time: f64) -> Self {
        Self {
            mode: PerturbMode::Product,
            negatives: GridNegatives::Shared,
            categorical: vec![CategoricalPerturbation::new(base_time)],
            numeric_std: 0.0,
        }
    }

    /// Independent bit flips with probability `eps` on a binary space.
    pub fn bernoulli(eps: f64) -> Result<Self> {
        let t = bernoulli_time(eps)?;
        Ok(Self {
            mode: PerturbMode::Product,
            negatives: GridNegatives::Shared,
            categorical: vec![CategoricalPerturbation::new(t).with_structure(Structure::Binary)],
            numeric_std: 0.0,
        })
    }

    /// Deterministic flip of one random bit; negatives flip a fresh random bit.
    pub fn grid_flip() -> Self {
        Self {
            mode: PerturbMode::Grid,
            negatives: GridNegatives::Independent,
            categorical: vec![CategoricalPerturbation {
                structure: Some(Structure::Binary),
                base_time: 1.0,
                scaling: TimeScaling::Fixed,
                form: KernelForm::Euler,
                sampler: CategoricalSampler::Kernel,
            }],
            numeric_std: 0.0,
        }
    }

    /// Grid perturbation with one kernel for every dimension.
    pub fn grid(perturbation: CategoricalPerturbation, negatives: GridNegatives) -> Self {
        Self {
            mode: PerturbMode::Grid,
            negatives,
            categorical: vec![perturbation],
            numeric_std: 0.0,
        }
    }

    /// Resample one random categorical coordinate from scratch and add
    /// Gaussian noise to the numeric block. Equivalent to masking the
    /// coordinate and unmasking it uniformly.
    pub fn tabular_grid(numeric_std: f64) -> Self {
        Self {
            mode: PerturbMode::Grid,
            negatives: GridNegatives::Shared,
            categorical: vec![CategoricalPerturbation::new(f64::INFINITY).with_structure(Structure::Uniform)],
            numeric_std,
        }
    }

    /// Resample one random coordinate uniformly; negatives resample the same coordinate.
    pub fn grid_resample() -> Self {
        Self::tabular_grid(0.0)
    }

    pub fn with_numeric_std(mut self, std: f64) -> Self {
        self.numeric_std = std;
        self
    }

    fn for_dim(&self, k: usize) -> Result<&CategoricalPerturbation> {
        match self.categorical.len() {
            1 => Ok(&self.categorical[0]),
            _ => self.categorical.get(k).ok_or_else(|| {
                Error::InvalidConfig(format!("no categorical perturbation given for dimension {k}"))
            }),
        }
    }
}

type KernelKey = (Structure, usize, u64, KernelForm);

/// A [`PerturbationSpec`] bound to a schema, with kernels precomputed.
#[derive(Clone, Debug)]
pub struct Perturbation {
    spec: PerturbationSpec,
    schema: StateSchema,
    kernels: Vec<Arc<TransitionKernel>>,
    gaussian_limit: Vec<Option<(Structure, f64)>>,
}

impl Perturbation {
    pub fn new(schema: &StateSchema, spec: &PerturbationSpec) -> Result<Self> {
        if !(spec.numeric_std >= 0.0) || !spec.numeric_std.is_finite() {
            return Err(Error::InvalidConfig(format!("numeric std {} must be finite and >= 0", spec.numeric_std)));
        }
        let d_cat = schema.categorical_dims();
        if spec.mode == PerturbMode::Grid && d_cat == 0 {
            return Err(Error::NoCategoricalDims);
        }
        if d_cat > 0 && spec.categorical.len() != 1 && spec.categorical.len() != d_cat {
            return Err(Error::InvalidConfig(format!(
                "{} categorical perturbations given for {d_cat} dimensions",
                spec.categorical.len()
            )));
        }
        let mut cache: HashMap<KernelKey, Arc<TransitionKernel>> = HashMap::new();
        let mut kernels = Vec::with_capacity(d_cat);
        let mut gaussian_limit = Vec::with_capacity(d_cat);
        let sizes = schema.categorical_sizes();
        let structures = schema.categorical_structures();
        for k in 0..d_cat {
            let cp = spec.for_dim(k)?;
            let size = sizes[k];
            let structure = cp.structure.unwrap_or(structures[k]);
            structure.validate(size)?;
            if cp.base_time.is_nan() || cp.base_time < 0.0 {
                return Err(Error::InvalidTime(cp.base_time));
            }
            let t = cp.scaling.apply(cp.base_time, size);
            let key = (structure, size, t.to_bits(), cp.form);
            let kernel = match cache.get(&key) {
                Some(k) => Arc::clone(k),
                None => {
                    let kernel = match cp.form {
                        KernelForm::Exact => heat_kernel(structure, size, t)?,
                        KernelForm::Euler => euler_kernel(&build_rate_matrix(structure, size)?, t)?,
                    };
                    let kernel = Arc::new(kernel);
                    cache.insert(key, Arc::clone(&kernel));
                    kernel
                }
            };
            kernels.push(kernel);
            gaussian_limit.push(match cp.sampler {
                CategoricalSampler::Kernel => None,
                CategoricalSampler::GaussianLimit => {
                    if cp.scaling != TimeScaling::Quadratic
                        || !matches!(structure, Structure::Cyclic | Structure::Ordinal)
                    {
                        return Err(Error::InvalidConfig(
                            "the Gaussian-limit sampler needs quadratic scaling and a cyclic or ordinal structure".into(),
                        ));
                    }
                    Some((structure, cp.base_time))
                }
            });
        }
        Ok(Self {
            spec: spec.clone(),
            schema: schema.clone(),
            kernels,
            gaussian_limit,
        })
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn schema(&self) -> &StateSchema {
        &self.schema
    }

    pub fn mode(&self) -> PerturbMode {
        self.spec.mode
    }

    /// Kernel of categorical dimension `k`.
    pub fn kernel(&self, k: usize) -> &TransitionKernel {
        &self.kernels[k]
    }

    pub fn kernels(&self) -> &[Arc<TransitionKernel>] {
        &self.kernels
    }

    /// Checks that the negatives drawn by [`Perturbation::negative`] give an
    /// unbiased estimate of the contrastive potential.
    pub fn check_for_loss(&self) -> Result<()> {
        for (k, kernel) in self.kernels.iter().enumerate() {
            let symmetric = kernel.is_symmetric(1e-12);
            match self.spec.mode {
                PerturbMode::Product if !symmetric => return Err(Error::AsymmetricKernel(k)),
                PerturbMode::Grid if !symmetric && self.spec.negatives == GridNegatives::Independent => {
                    return Err(Error::AsymmetricKernel(k))
                }
                _ => {}
            }
            if kernel.form == KernelForm::Euler
                && self.spec.mode == PerturbMode::Grid
                && self.spec.negatives == GridNegatives::Shared
            {
                return Err(Error::InvalidConfig(
                    "a deterministic grid flip with shared negatives maps every negative back onto the data point; \
                     use independent negatives"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    fn perturb_dim<R: Rng + ?Sized>(&self, k: usize, state: usize, rng: &mut R) -> Result<usize> {
        match self.gaussian_limit[k] {
            Some((structure, base)) => sample_gaussian_limit(state, self.kernels[k].states(), base, structure, rng),
            None => Ok(self.kernels[k].sample(state, rng)),
        }
    }

    fn add_numeric_noise<R: Rng + ?Sized>(&self, y: &mut MixedSample, rng: &mut R) {
        if self.spec.numeric_std > 0.0 {
            for v in &mut y.numeric {
                let z: f64 = StandardNormal.sample(rng);
                *v += self.spec.numeric_std * z;
            }
        }
    }

    /// Every categorical coordinate perturbed independently plus numeric noise.
    pub fn perturb_product<R: Rng + ?Sized>(&self, x: &MixedSample, rng: &mut R) -> Result<MixedSample> {
        self.schema.check_sample(x)?;
        let mut y = x.clone();
        for k in 0..y.categorical.len() {
            y.categorical[k] = self.perturb_dim(k, x.categorical[k], rng)?;
        }
        self.add_numeric_noise(&mut y, rng);
        Ok(y)
    }

    /// Perturb one uniformly chosen categorical coordinate (plus numeric
    /// noise). Returns the chosen coordinate.
    pub fn perturb_grid<R: Rng + ?Sized>(&self, x: &MixedSample, rng: &mut R) -> Result<(MixedSample, usize)> {
        self.schema.check_sample(x)?;
        let d = x.categorical.len();
        if d == 0 {
            return Err(Error::NoCategoricalDims);
        }
        let k = rng.random_range(0..d);
        let mut y = x.clone();
        y.categorical[k] = self.perturb_dim(k, x.categorical[k], rng)?;
        self.add_numeric_noise(&mut y, rng);
        Ok((y, k))
    }

    /// Forward draw `y ~ q(· | x)` in the configured mode. The returned
    /// coordinate is `Some` in grid mode.
    pub fn perturb<R: Rng + ?Sized>(&self, x: &MixedSample, rng: &mut R) -> Result<(MixedSample, Option<usize>)> {
        match self.spec.mode {
            PerturbMode::Product => Ok((self.perturb_product(x, rng)?, None)),
            PerturbMode::Grid => self.perturb_grid(x, rng).map(|(y, k)| (y, Some(k))),
        }
    }

    /// One negative `x₋` drawn from `y`. In grid mode with shared negatives
    /// `dim` must be the coordinate returned by [`Perturbation::perturb`];
    /// it is resampled through the reverse kernel.
    pub fn negative<R: Rng + ?Sized>(&self, y: &MixedSample, dim: Option<usize>, rng: &mut R) -> Result<MixedSample> {
        match (self.spec.mode, self.spec.negatives) {
            (PerturbMode::Product, _) => self.perturb_product(y, rng),
            (PerturbMode::Grid, GridNegatives::Independent) => self.perturb_grid(y, rng).map(|(x, _)| x),
            (PerturbMode::Grid, GridNegatives::Shared) => {
                let k = dim.ok_or_else(|| Error::InvalidConfig("shared grid negatives need the perturbed dimension".into()))?;
                let mut x = y.clone();
                x.categorical[k] = match self.gaussian_limit[k] {
                    Some(_) => self.perturb_dim(k, y.categorical[k], rng)?,
                    None => self.kernels[k].sample_reverse(y.categorical[k], rng),
                };
                self.add_numeric_noise(&mut x, rng);
                Ok(x)
            }
        }
    }
}

/// Flip every bit of `x` independently with probability `eps`.
pub fn perturb_bernoulli<R: Rng + ?Sized>(x: &[usize], eps: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::ProbabilityOutOfRange(eps));
    }
    x.iter()
        .map(|&b| {
            if b > 1 {
                return Err(Error::StateOutOfRange { state: b, size: 2 });
            }
            Ok(if rng.random::<f64>() < eps { 1 - b } else { b })
        })
        .collect()
}
