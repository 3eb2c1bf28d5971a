//! Discretization of 2D points into digit vectors.
//!
//! Each coordinate in `[−4, 4]` is quantized uniformly into `base^digits`
//! bins and the bin number is written as `digits` symbols, most significant
//! first: reflected binary Gray code for base 2, plain positional digits
//! otherwise. Decoding returns the bin centre.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::toy::{ToyDistribution, BOX};
use crate::error::{Error, Result};
use crate::kernels::Structure;
use crate::rng::Streams;
use crate::schema::{Batch, Dimension, StateSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    Gray,
    Positional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CodeSpec {
    pub base: usize,
    pub digits: usize,
    pub coding: Coding,
}

impl CodeSpec {
    pub fn new(base: usize, digits: usize, coding: Coding) -> Result<Self> {
        if base < 2 || digits == 0 {
            return Err(Error::InvalidConfig(format!("invalid code base {base} / digits {digits}")));
        }
        if coding == Coding::Gray && base != 2 {
            return Err(Error::InvalidConfig("Gray coding needs base 2".into()));
        }
        if (base as f64).powi(digits as i32) > 2f64.powi(52) {
            return Err(Error::InvalidConfig("too many bins".into()));
        }
        Ok(Self { base, digits, coding })
    }

    /// 16-bit Gray code per coordinate: 32 binary dimensions.
    pub fn gray16() -> Self {
        Self::new(2, 16, Coding::Gray).expect("valid preset")
    }

    /// 8 base-5 digits per coordinate: 16 dimensions with 5 states.
    pub fn base5() -> Self {
        Self::new(5, 8, Coding::Positional).expect("valid preset")
    }

    /// 6 decimal digits per coordinate: 12 dimensions with 10 states.
    pub fn base10() -> Self {
        Self::new(10, 6, Coding::Positional).expect("valid preset")
    }

    pub fn bins(&self) -> u64 {
        (self.base as u64).pow(self.digits as u32)
    }

    /// Dimensions of an encoded 2D point.
    pub fn dims(&self) -> usize {
        2 * self.digits
    }

    /// Schema of encoded points: binary dimensions for base 2, uniform otherwise.
    pub fn schema(&self) -> StateSchema {
        let structure = if self.base == 2 { Structure::Binary } else { Structure::Uniform };
        let mut dims = Vec::with_capacity(self.dims());
        for axis in ["x", "y"] {
            for d in 0..self.digits {
                dims.push(Dimension::Categorical {
                    name: format!("{axis}{d}"),
                    size: self.base,
                    structure,
                });
            }
        }
        StateSchema::new(dims).expect("valid code schema")
    }

    /// Bin index of `v`; values outside the box are clamped to the edge bins.
    pub fn bin(&self, v: f64) -> u64 {
        let bins = self.bins();
        if !(-BOX..=BOX).contains(&v) {
            log::warn!("value {v} outside [-{BOX}, {BOX}] clamped to the boundary bin");
        }
        let raw = ((v + BOX) / (2.0 * BOX) * bins as f64).floor();
        raw.clamp(0.0, (bins - 1) as f64) as u64
    }

    /// Centre of bin `n`.
    pub fn bin_center(&self, n: u64) -> f64 {
        -BOX + (n as f64 + 0.5) * 2.0 * BOX / self.bins() as f64
    }

    /// Digits of bin `n`, most significant first.
    pub fn encode_bin(&self, n: u64) -> Vec<usize> {
        let value = match self.coding {
            Coding::Gray => n ^ (n >> 1),
            Coding::Positional => n,
        };
        let base = self.base as u64;
        let mut digits = vec![0usize; self.digits];
        let mut rest = value;
        for d in digits.iter_mut().rev() {
            *d = (rest % base) as usize;
            rest /= base;
        }
        digits
    }

    /// Bin number of a digit vector.
    pub fn decode_bin(&self, digits: &[usize]) -> Result<u64> {
        if digits.len() != self.digits {
            return Err(Error::DimensionMismatch {
                expected: self.digits,
                got: digits.len(),
            });
        }
        let mut value = 0u64;
        for &d in digits {
            if d >= self.base {
                return Err(Error::StateOutOfRange { state: d, size: self.base });
            }
            value = value * self.base as u64 + d as u64;
        }
        Ok(match self.coding {
            Coding::Gray => {
                let mut n = value;
                let mut shift = value >> 1;
                while shift != 0 {
                    n ^= shift;
                    shift >>= 1;
                }
                n
            }
            Coding::Positional => value,
        })
    }

    pub fn encode_coord(&self, v: f64) -> Vec<usize> {
        self.encode_bin(self.bin(v))
    }

    pub fn decode_coord(&self, digits: &[usize]) -> Result<f64> {
        Ok(self.bin_center(self.decode_bin(digits)?))
    }

    pub fn encode_point(&self, p: [f64; 2]) -> Vec<usize> {
        let mut out = self.encode_coord(p[0]);
        out.extend(self.encode_coord(p[1]));
        out
    }

    pub fn decode_point(&self, digits: &[usize]) -> Result<[f64; 2]> {
        if digits.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: digits.len(),
            });
        }
        Ok([
            self.decode_coord(&digits[..self.digits])?,
            self.decode_coord(&digits[self.digits..])?,
        ])
    }

    /// Encode a list of points into a categorical batch.
    pub fn encode_points(&self, points: &[[f64; 2]]) -> Batch {
        let mut cats = Array2::zeros((points.len(), self.dims()));
        for (i, p) in points.iter().enumerate() {
            for (j, d) in self.encode_point(*p).into_iter().enumerate() {
                cats[[i, j]] = d;
            }
        }
        Batch::from_categorical(cats)
    }

    /// Decode every row of a batch.
    pub fn decode_batch(&self, batch: &Batch) -> Result<Vec<[f64; 2]>> {
        batch
            .categorical
            .rows()
            .into_iter()
            .map(|r| self.decode_point(&r.to_vec()))
            .collect()
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.coding, self.base, self.digits) {
            (Coding::Gray, _, d) => write!(f, "gray{d}"),
            (Coding::Positional, b, d) => write!(f, "base{b}x{d}"),
        }
    }
}

impl FromStr for CodeSpec {
    type Err = Error;

    /// `gray16`, `base5`, `base10`, or `grayN` / `baseBxN` in general.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Parse(format!("unknown code '{s}'"));
        match s.as_str() {
            "base5" => return Ok(Self::base5()),
            "base10" => return Ok(Self::base10()),
            _ => {}
        }
        if let Some(bits) = s.strip_prefix("gray") {
            return Self::new(2, bits.parse().map_err(|_| bad())?, Coding::Gray);
        }
        if let Some(rest) = s.strip_prefix("base") {
            let (b, d) = rest.split_once('x').ok_or_else(bad)?;
            return Self::new(b.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?, Coding::Positional);
        }
        Err(bad())
    }
}

impl From<CodeSpec> for String {
    fn from(c: CodeSpec) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for CodeSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Sample `n` toy points and encode them.
pub fn make_discrete_dataset(dist: ToyDistribution, spec: &CodeSpec, n: usize, streams: Streams) -> (StateSchema, Batch) {
    let points = dist.sample(n, streams);
    (spec.schema(), spec.encode_points(&points))
}
