//! Density rasters over the decoded 2D plane.
//!
//! Pixel `(r, c)` of a `resolution × resolution` raster covers the square
//! with centre `x = −4 + (c + ½)·8/R`, `y = 4 − (r + ½)·8/R`, so row 0 is the
//! top edge. Its value is `exp(−U)` of the encoded centre, scaled so the
//! largest pixel equals 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::datasets::codes::CodeSpec;
use crate::datasets::toy::BOX;
use crate::error::{Error, Result};
use crate::models::EnergyModel;

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub resolution: usize,
    /// Row-major normalized densities in `[0, 1]`.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        let step = 2.0 * BOX / self.resolution as f64;
        [-BOX + (col as f64 + 0.5) * step, BOX - (row as f64 + 0.5) * step]
    }

    /// Pixel containing `p`; points outside the box land on the border.
    pub fn pixel_of(&self, p: [f64; 2]) -> (usize, usize) {
        let r = self.resolution as f64;
        let idx = |v: f64| ((v / (2.0 * BOX) * r).floor().clamp(0.0, r - 1.0)) as usize;
        (idx(BOX - p[1]), idx(p[0] + BOX))
    }

    /// Binary PGM (`P5`) with 8-bit gray levels.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.resolution, self.resolution)?;
        let bytes: Vec<u8> = self.values.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    /// One CSV line per raster row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in self.values.chunks(self.resolution) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate the model on the encoded pixel centres.
pub fn energy_heatmap<M: EnergyModel>(model: &M, code: &CodeSpec, resolution: usize) -> Result<Heatmap> {
    if resolution == 0 {
        return Err(Error::InvalidConfig("heatmap resolution must be positive".into()));
    }
    let mut map = Heatmap {
        resolution,
        values: Vec::new(),
    };
    let centres: Vec<[f64; 2]> = (0..resolution * resolution)
        .map(|i| map.pixel_center(i / resolution, i % resolution))
        .collect();
    let batch = code.encode_points(&centres);
    model.schema().check_batch(&batch)?;
    let u = model.energy(&batch)?;
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !u_min.is_finite() {
        return Err(Error::NonFinite("heatmap energies".into()));
    }
    map.values = u.iter().map(|&e| (u_min - e).exp()).collect();
    Ok(map)
}

/// Write `<stem>.pgm` and `<stem>.csv`.
pub fn export_energy_heatmap<M: EnergyModel>(model: &M, code: &CodeSpec, resolution: usize, stem: &Path) -> Result<Heatmap> {
    let map = energy_heatmap(model, code, resolution)?;
    map.write_pgm(&stem.with_extension("pgm"))?;
    map.write_csv(&stem.with_extension("csv"))?;
    Ok(map)
}

/// Mean density on the pixels of (up to `n`) data points divided by the
/// mean density on `n` uniformly drawn pixels.
pub fn support_contrast<R: Rng + ?Sized>(map: &Heatmap, data: &[[f64; 2]], n: usize, rng: &mut R) -> Result<f64> {
    let used = &data[..data.len().min(n)];
    if used.is_empty() || n == 0 {
        return Err(Error::InvalidConfig("support contrast needs data points".into()));
    }
    let on_data = used
        .iter()
        .map(|&p| {
            let (r, c) = map.pixel_of(p);
            map.get(r, c)
        })
        .sum::<f64>()
        / used.len() as f64;
    let random = (0..n)
        .map(|_| map.get(rng.random_range(0..map.resolution), rng.random_range(0..map.resolution)))
        .sum::<f64>()
        / n as f64;
    if !(random > 0.0) {
        return Err(Error::NonFinite("support contrast baseline is zero".into()));
    }
    Ok(on_data / random)
}
