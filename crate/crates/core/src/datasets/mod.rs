//! Synthetic datasets and the dataset file format.

pub mod codes;
pub mod io;
pub mod ising;
pub mod ring;
pub mod toy;

pub use codes::{make_discrete_dataset, CodeSpec, Coding};
pub use io::{read_dataset, read_matrix, write_dataset, write_matrix};
pub use ising::{make_ising_dataset, IsingSpec};
pub use ring::make_ring_tabular;
pub use toy::ToyDistribution;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::Streams;
use crate::schema::{Batch, StateSchema};

/// Serializable description of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// A 2D toy distribution discretized with a digit code.
    Toy { dist: ToyDistribution, code: CodeSpec },
    /// The mixed numeric/categorical ring dataset.
    Ring,
    /// Samples of a lattice Ising model.
    Ising {
        side: usize,
        sigma: f64,
        #[serde(default = "default_gibbs_steps")]
        gibbs_steps: usize,
    },
}

fn default_gibbs_steps() -> usize {
    ising::DEFAULT_GIBBS_STEPS
}

/// A generated dataset; `couplings` is set for Ising data.
#[derive(Clone, Debug)]
pub struct Generated {
    pub schema: StateSchema,
    pub batch: Batch,
    pub couplings: Option<Array2<f64>>,
}

/// Generate `n` records. Record `i` only depends on `streams.index(i)`.
pub fn generate(spec: &DatasetSpec, n: usize, streams: Streams) -> Result<Generated> {
    Ok(match spec {
        DatasetSpec::Toy { dist, code } => {
            let (schema, batch) = make_discrete_dataset(*dist, code, n, streams);
            Generated {
                schema,
                batch,
                couplings: None,
            }
        }
        DatasetSpec::Ring => {
            let (schema, batch) = make_ring_tabular(n, streams);
            Generated {
                schema,
                batch,
                couplings: None,
            }
        }
        DatasetSpec::Ising {
            side,
            sigma,
            gibbs_steps,
        } => {
            let (schema, batch, j) = make_ising_dataset(&IsingSpec { side: *side, sigma: *sigma }, n, *gibbs_steps, streams)?;
            Generated {
                schema,
                batch,
                couplings: Some(j),
            }
        }
    })
}
