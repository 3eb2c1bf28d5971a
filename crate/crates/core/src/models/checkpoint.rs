//! Model checkpoints.
//!
//! Layout: one JSON header line (format version, schema, architecture,
//! training step, optimizer settings and the numeric scaler), a CSV column header, then one row
//! per parameter: `theta` alone, or `theta,m,v` when optimizer moments are
//! saved. Floats use the shortest representation that parses back to the
//! same bits, so a save/load round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnyModel, EnergyModel, ModelSpec};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::schema::{NumericScaler, StateSchema};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    schema: StateSchema,
    model: ModelSpec,
    step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<NumericScaler>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimizerHeader {
    config: OptimizerConfig,
    step: u64,
}

/// Everything needed to resume training.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: AnyModel,
    /// Number of completed training steps.
    pub step: u64,
    pub optimizer: Option<Optimizer>,
    /// Standardization of numeric inputs; the model only sees scaled values.
    pub scaler: Option<NumericScaler>,
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        schema: ckpt.model.schema().clone(),
        model: ckpt.model.spec(),
        step: ckpt.step,
        optimizer: ckpt.optimizer.as_ref().map(|o| OptimizerHeader {
            config: o.config.clone(),
            step: o.step,
        }),
        scaler: ckpt.scaler.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    let theta = ckpt.model.params();
    match &ckpt.optimizer {
        Some(o) => {
            writeln!(w, "theta,m,v")?;
            for i in 0..theta.len() {
                writeln!(w, "{},{},{}", theta[i], o.m[i], o.v[i])?;
            }
        }
        None => {
            writeln!(w, "theta")?;
            for t in theta {
                writeln!(w, "{t}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("checkpoint line {line}: bad number '{s}'")))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty checkpoint".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let columns = lines
        .next()
        .ok_or_else(|| Error::Parse("checkpoint has no column header".into()))??;
    let with_moments = match columns.trim() {
        "theta" => false,
        "theta,m,v" => true,
        other => return Err(Error::Parse(format!("unknown checkpoint columns '{other}'"))),
    };
    let (mut theta, mut m, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if with_moments { 3 } else { 1 };
        if fields.len() != expected {
            return Err(Error::Parse(format!("checkpoint line {}: expected {expected} fields", i + 3)));
        }
        theta.push(parse_f64(fields[0], i + 3)?);
        if with_moments {
            m.push(parse_f64(fields[1], i + 3)?);
            v.push(parse_f64(fields[2], i + 3)?);
        }
    }
    let model = AnyModel::with_params(&header.model, &header.schema, theta)?;
    let optimizer = match header.optimizer {
        Some(h) => {
            let mut opt = Optimizer::new(h.config, model.num_params());
            opt.step = h.step;
            if with_moments {
                opt.m = m;
                opt.v = v;
            }
            Some(opt)
        }
        None => None,
    };
    Ok(Checkpoint {
        model,
        step: header.step,
        optimizer,
        scaler: header.scaler,
    })
}
