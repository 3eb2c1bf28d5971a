//! Dataset files.
//!
//! ```text
//! # {"dims":[{"kind":"numeric","name":"x"}, …]}
//! x,y,circle,color
//! 0.731,-1.92,2,11
//! ```
//!
//! Line one is `# ` followed by the schema as JSON, line two holds the
//! column names, then one CSV row per record. Numeric values use the
//! shortest decimal form that parses back to the same `f64`; categorical
//! values are written 1-based; spins as `-1`/`1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::schema::{Batch, Dimension, StateSchema};

pub fn write_dataset_to<W: Write>(mut w: W, schema: &StateSchema, batch: &Batch) -> Result<()> {
    schema.check_batch(batch)?;
    writeln!(w, "# {}", serde_json::to_string(schema)?)?;
    let names: Vec<&str> = schema.dims.iter().map(Dimension::name).collect();
    writeln!(w, "{}", names.join(","))?;
    let mut fields = Vec::with_capacity(schema.dims.len());
    for i in 0..batch.len() {
        fields.clear();
        let (mut num, mut cat) = (0, 0);
        for dim in &schema.dims {
            match dim {
                Dimension::Numeric { .. } => {
                    fields.push(batch.numeric[[i, num]].to_string());
                    num += 1;
                }
                Dimension::Categorical { .. } => {
                    fields.push((batch.categorical[[i, cat]] + 1).to_string());
                    cat += 1;
                }
                Dimension::Spin { .. } => {
                    fields.push(if batch.categorical[[i, cat]] == 0 { "-1" } else { "1" }.to_string());
                    cat += 1;
                }
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, schema: &StateSchema, batch: &Batch) -> Result<()> {
    write_dataset_to(BufWriter::new(File::create(path)?), schema, batch)
}

pub fn read_dataset_from<R: Read>(r: R) -> Result<(StateSchema, Batch)> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("dataset file must start with a '# {schema}' line".into()))?;
    let schema: StateSchema = serde_json::from_str(json.trim())?;
    let schema = StateSchema::new(schema.dims)?;
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    if headers.len() != schema.dims.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} columns for {} schema dimensions",
            headers.len(),
            schema.dims.len()
        )));
    }
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    let mut n = 0;
    for (line, record) in csv_reader.records().enumerate() {
        let record = record?;
        let at = |msg: &str| Error::Parse(format!("data row {}: {msg}", line + 1));
        for (dim, field) in schema.dims.iter().zip(record.iter()) {
            let field = field.trim();
            match dim {
                Dimension::Numeric { .. } => numeric.push(field.parse::<f64>().map_err(|_| at("bad number"))?),
                Dimension::Categorical { size, .. } => {
                    let v: usize = field.parse().map_err(|_| at("bad categorical value"))?;
                    if v == 0 || v > *size {
                        return Err(at(&format!("categorical value {v} outside 1..={size}")));
                    }
                    categorical.push(v - 1);
                }
                Dimension::Spin { .. } => categorical.push(match field {
                    "-1" => 0,
                    "1" | "+1" => 1,
                    _ => return Err(at("spin must be -1 or 1")),
                }),
            }
        }
        n += 1;
    }
    let batch = Batch::new(
        Array2::from_shape_vec((n, schema.numeric_dims()), numeric).map_err(|e| Error::Parse(e.to_string()))?,
        Array2::from_shape_vec((n, schema.categorical_dims()), categorical).map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    Ok((schema, batch))
}

pub fn read_dataset(path: &Path) -> Result<(StateSchema, Batch)> {
    read_dataset_from(File::open(path)?)
}

/// Plain CSV matrix without header.
pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            line.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad matrix entry '{v}'"))))
                .collect::<Result<_>>()?,
        );
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Array2::from_shape_vec((rows.len(), cols), rows.concat()).map_err(|e| Error::Parse(e.to_string()))
}
