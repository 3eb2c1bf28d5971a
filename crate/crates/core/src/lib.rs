//! Energy discrepancy training for energy-based models on discrete and
//! mixed state spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: rate matrices of structured categorical variables and
//!   their closed-form heat kernels.
//! * [`perturb`]: product, grid and Bernoulli perturbations of records.
//! * [`models`]: energy functions with exact parameter gradients.
//! * [`exact`], [`loss`], [`optim`], [`train`]: the training objective,
//!   its brute-force counterpart on tiny spaces, and the training loop.
//! * [`samplers`]: Gibbs, Langevin and the interleaved mixed sampler.
//! * [`datasets`] and [`eval`]: data generators, file formats and metrics.
//! * [`cli`]: the `ebm-heat` command-line driver.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod exact;
pub mod kernels;
pub mod loss;
pub mod models;
pub mod optim;
pub mod perturb;
pub mod rng;
pub mod samplers;
pub mod schema;
pub mod train;

pub use error::{Error, Result};
pub use kernels::{build_rate_matrix, heat_kernel, matrix_exponential, RateMatrix, Structure, TransitionKernel};
pub use perturb::{Perturbation, PerturbationSpec};
pub use models::{AnyModel, EnergyModel, IsingEnergy, MlpEnergy, MlpSpec, ModelSpec, TabulatedEnergy};
pub use rng::Streams;
pub use schema::{Batch, Dimension, MixedSample, NumericScaler, StateSchema};
