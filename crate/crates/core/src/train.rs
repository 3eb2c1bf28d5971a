//! Minibatch training with the energy-discrepancy loss.
//!
//! Step `s` (counted from the start of training, including steps completed
//! before a resume) draws its minibatch and perturbations from the
//! substream `streams.child("step").index(s)`, so a resumed run continues
//! exactly where an uninterrupted one would be.

use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{ed_loss_and_grad, EdLossConfig};
use crate::models::EnergyModel;
use crate::optim::Optimizer;
use crate::perturb::Perturbation;
use crate::rng::Streams;
use crate::schema::Batch;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub loss: EdLossConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Seconds since this call to [`train`] started.
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
}

impl TrainReport {
    /// `step,loss,grad_norm,wall_time`, one row per step.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

/// Indices of the minibatch used at a step.
pub fn minibatch_indices<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<usize> {
    if batch_size <= n {
        sample(rng, n, batch_size).into_vec()
    } else {
        (0..batch_size).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Run `cfg.steps` optimizer steps starting at global step `start_step`.
///
/// `hook` is called after every step with the record of that step.
pub fn train<M: EnergyModel>(
    model: &mut M,
    data: &Batch,
    cfg: &TrainConfig,
    optimizer: &mut Optimizer,
    start_step: u64,
    streams: Streams,
    hook: &mut dyn FnMut(&TrainRecord, &M),
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("training data is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    cfg.loss.validate()?;
    optimizer.config.validate()?;
    model.schema().check_batch(data)?;
    let perturbation = Perturbation::new(model.schema(), &cfg.loss.perturbation)?;
    perturbation.check_for_loss()?;

    let started = Instant::now();
    let mut report = TrainReport::default();
    for step in start_step..start_step + cfg.steps {
        let node = streams.child("step").index(step);
        let idx = minibatch_indices(data.len(), cfg.batch_size, &mut node.child("batch").rng());
        let batch = data.select(&idx);
        let (loss, grad) = match ed_loss_and_grad(model, &batch, &perturbation, &cfg.loss, node.child("perturb")) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Err(Error::Divergence { step, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        optimizer.update(model.params_mut(), &grad)?;
        model.project();
        let record = TrainRecord {
            step,
            loss,
            grad_norm,
            wall_time: started.elapsed().as_secs_f64(),
        };
        hook(&record, model);
        report.records.push(record);
    }
    Ok(report)
}
