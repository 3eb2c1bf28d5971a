//! Heat kernels on structured discrete state spaces.
//!
//! A categorical variable with `S` states is given a graph structure; the
//! graph Laplacian is the rate matrix `R` of a continuous-time Markov chain
//! and the perturbation after time `t` is the heat kernel `exp(tR)`.
//!
//! Matrix orientation: `K[[b, a]] = q_t(b | a)`, the probability of moving
//! from state `a` to state `b`. Columns sum to one. State indices are
//! 0-based in this API.
//!
//! | structure | rate matrix | kernel |
//! |-----------|-------------|--------|
//! | uniform   | `11ᵀ/S − I` | `e^{-t}δ + (1 − e^{-t})/S` |
//! | cyclic    | circulant, `+1` on both ring neighbours | Fourier expansion |
//! | ordinal   | path Laplacian | cosine expansion |
//! | masking   | star into the absorbing state `M` | closed form |
//! | binary    | `[[-1, 1], [1, -1]]` | `(1 ± e^{-2t})/2` |

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries above `-CLIP_THRESHOLD` are treated as round-off and clipped to zero.
pub const CLIP_THRESHOLD: f64 = 1e-10;

/// Largest time accepted by [`matrix_exponential`].
pub const MAX_ORACLE_TIME: f64 = 1e6;

/// Graph structure of one categorical variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Structure {
    /// Fully connected graph.
    Uniform,
    /// Ring: state `a` neighbours `a ± 1 (mod S)`.
    Cyclic,
    /// Path: state `a` neighbours `a ± 1`, reflecting at the ends.
    Ordinal,
    /// Star graph draining into the absorbing (mask) state; 0-based index.
    Masking { absorbing: usize },
    /// The two-state graph.
    Binary,
}

impl Structure {
    pub fn validate(&self, states: usize) -> Result<()> {
        if states < 2 {
            return Err(Error::InvalidStateCount(states));
        }
        match *self {
            Structure::Binary if states != 2 => Err(Error::BinaryNeedsTwoStates(states)),
            Structure::Masking { absorbing } if absorbing >= states => {
                Err(Error::AbsorbingOutOfRange { absorbing, states })
            }
            _ => Ok(()),
        }
    }

    /// Whether the rate matrix (and hence every heat kernel) is symmetric.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Structure::Masking { .. })
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Uniform => write!(f, "uniform"),
            Structure::Cyclic => write!(f, "cyclic"),
            Structure::Ordinal => write!(f, "ordinal"),
            Structure::Binary => write!(f, "binary"),
            // 1-based in text form
            Structure::Masking { absorbing } => write!(f, "masking:{}", absorbing + 1),
        }
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "uniform" | "unif" => Ok(Structure::Uniform),
            "cyclic" | "cyc" => Ok(Structure::Cyclic),
            "ordinal" | "ord" => Ok(Structure::Ordinal),
            "binary" => Ok(Structure::Binary),
            other => {
                let rest = other
                    .strip_prefix("masking:")
                    .or_else(|| other.strip_prefix("mask:"))
                    .ok_or_else(|| Error::Parse(format!("unknown structure '{s}'")))?;
                let m: usize = rest
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad absorbing state in '{s}'")))?;
                if m == 0 {
                    return Err(Error::Parse("absorbing state is 1-based".into()));
                }
                Ok(Structure::Masking { absorbing: m - 1 })
            }
        }
    }
}

impl From<Structure> for String {
    fn from(s: Structure) -> Self {
        s.to_string()
    }
}

impl TryFrom<String> for Structure {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Generator of the chain: `R[[b, a]]` is the jump rate from `a` to `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    pub structure: Structure,
    pub entries: Array2<f64>,
}

impl RateMatrix {
    pub fn states(&self) -> usize {
        self.entries.nrows()
    }

    /// Closed-form spectrum, sorted from 0 downwards.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s = self.states();
        let mut ev: Vec<f64> = match self.structure {
            Structure::Uniform | Structure::Masking { .. } => {
                std::iter::once(0.0).chain(std::iter::repeat_n(-1.0, s - 1)).collect()
            }
            Structure::Binary => vec![0.0, -2.0],
            Structure::Cyclic => (0..s).map(|p| cyclic_eigenvalue(p, s)).collect(),
            Structure::Ordinal => (0..s).map(|p| ordinal_eigenvalue(p, s)).collect(),
        };
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `|λ₂|`, the magnitude of the second eigenvalue.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues()[1].abs()
    }
}

/// `λ_p = 2cos(2πω_p) − 2` with `ω_p = p/S` (0-based `p`), written as
/// `−4 sin²(πω_p)` so that `λ_0` is exactly zero.
fn cyclic_eigenvalue(p: usize, s: usize) -> f64 {
    let x = (PI * p as f64 / s as f64).sin();
    -4.0 * x * x
}

/// Same as the cyclic case with `ω_p = p/(2S)`.
fn ordinal_eigenvalue(p: usize, s: usize) -> f64 {
    let x = (PI * p as f64 / (2 * s) as f64).sin();
    -4.0 * x * x
}

/// `exp(λt)` with the convention `exp(0·∞) = 1`.
fn decay(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        (lambda * t).exp()
    }
}

/// Graph Laplacian of the given structure on `states` states.
pub fn build_rate_matrix(structure: Structure, states: usize) -> Result<RateMatrix> {
    structure.validate(states)?;
    let s = states;
    let mut r = Array2::<f64>::zeros((s, s));
    match structure {
        Structure::Uniform => {
            r.fill(1.0 / s as f64);
            for a in 0..s {
                r[[a, a]] -= 1.0;
            }
        }
        Structure::Cyclic => {
            for a in 0..s {
                r[[(a + 1) % s, a]] += 1.0;
                r[[(a + s - 1) % s, a]] += 1.0;
                r[[a, a]] -= 2.0;
            }
        }
        Structure::Ordinal => {
            for a in 0..s {
                if a + 1 < s {
                    r[[a + 1, a]] += 1.0;
                    r[[a, a]] -= 1.0;
                }
                if a > 0 {
                    r[[a - 1, a]] += 1.0;
                    r[[a, a]] -= 1.0;
                }
            }
        }
        Structure::Masking { absorbing } => {
            for a in 0..s {
                r[[absorbing, a]] += 1.0;
                r[[a, a]] -= 1.0;
            }
        }
        Structure::Binary => {
            r[[0, 0]] = -1.0;
            r[[1, 0]] = 1.0;
            r[[0, 1]] = 1.0;
            r[[1, 1]] = -1.0;
        }
    }
    Ok(RateMatrix { structure, entries: r })
}

/// How a kernel was obtained from its rate matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// The heat kernel `exp(tR)`.
    #[default]
    Exact,
    /// One explicit Euler step `I + tR` (e.g. the deterministic binary flip at `t = 1`).
    Euler,
}

/// Column-stochastic transition matrix of one categorical dimension.
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    pub structure: Structure,
    pub time: f64,
    pub form: KernelForm,
    entries: Array2<f64>,
    /// Per source column, the cumulative distribution over targets.
    column_cdf: Vec<f64>,
    /// Per target row, the cumulative of the normalized row (reverse moves).
    row_cdf: Vec<f64>,
}

impl TransitionKernel {
    /// Wrap a matrix as a kernel: clips round-off negatives, renormalizes
    /// columns and precomputes sampling tables.
    pub fn from_entries(structure: Structure, time: f64, form: KernelForm, mut entries: Array2<f64>) -> Result<Self> {
        let s = entries.nrows();
        if entries.ncols() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: entries.ncols(),
            });
        }
        for v in entries.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite("kernel entry".into()));
            }
            if *v < 0.0 {
                if *v < -CLIP_THRESHOLD {
                    return Err(Error::NegativeMass { value: *v });
                }
                *v = 0.0;
            }
        }
        for mut col in entries.columns_mut() {
            let total: f64 = col.sum();
            col.mapv_inplace(|v| v / total);
        }

        let mut column_cdf = vec![0.0; s * s];
        let mut row_cdf = vec![0.0; s * s];
        for a in 0..s {
            let mut acc = 0.0;
            for b in 0..s {
                acc += entries[[b, a]];
                column_cdf[a * s + b] = acc;
            }
        }
        for b in 0..s {
            let total: f64 = entries.row(b).sum();
            let mut acc = 0.0;
            for a in 0..s {
                acc += if total > 0.0 { entries[[b, a]] / total } else { 0.0 };
                row_cdf[b * s + a] = acc;
            }
        }
        Ok(Self {
            structure,
            time,
            form,
            entries,
            column_cdf,
            row_cdf,
        })
    }

    pub fn states(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// `q_t(b | a)`.
    pub fn prob(&self, to: usize, from: usize) -> f64 {
        self.entries[[to, from]]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let s = self.states();
        (0..s).all(|a| (0..a).all(|b| (self.entries[[a, b]] - self.entries[[b, a]]).abs() <= tol))
    }

    /// Draw `b ~ q_t(· | from)` by inverting the column CDF.
    pub fn sample<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let s = self.states();
        invert_cdf(&self.column_cdf[from * s..(from + 1) * s], rng)
    }

    /// Draw a source state `a` with probability proportional to `q_t(to | a)`.
    ///
    /// For symmetric kernels this coincides with [`TransitionKernel::sample`].
    pub fn sample_reverse<R: Rng + ?Sized>(&self, to: usize, rng: &mut R) -> usize {
        let s = self.states();
        invert_cdf(&self.row_cdf[to * s..(to + 1) * s], rng)
    }

    /// Kernel dump: a `S,t,structure` header line, its values, then the
    /// matrix row by row (row `b`, column `a`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "S,t,structure")?;
        writeln!(w, "{},{},{}", self.states(), self.time, self.structure)?;
        for row in self.entries.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn invert_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    let idx = cdf.partition_point(|&c| c <= u);
    // skip zero-mass states that share the CDF value
    idx.min(cdf.len() - 1)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Closed-form solution of the heat equation `∂_t q = R q` at time `t`.
///
/// `t = f64::INFINITY` gives the stationary (or fully absorbed) limit.
pub fn heat_kernel(structure: Structure, states: usize, t: f64) -> Result<TransitionKernel> {
    structure.validate(states)?;
    check_time(t)?;
    let s = states;
    let mut k = Array2::<f64>::zeros((s, s));
    match structure {
        Structure::Uniform => {
            let stay = (-t).exp();
            let spread = (1.0 - stay) / s as f64;
            k.fill(spread);
            for a in 0..s {
                k[[a, a]] += stay;
            }
        }
        Structure::Binary => {
            let e = (-2.0 * t).exp();
            k[[0, 0]] = 0.5 * (1.0 + e);
            k[[1, 1]] = 0.5 * (1.0 + e);
            k[[0, 1]] = 0.5 * (1.0 - e);
            k[[1, 0]] = 0.5 * (1.0 - e);
        }
        Structure::Masking { absorbing } => {
            let stay = (-t).exp();
            for a in 0..s {
                if a == absorbing {
                    k[[a, a]] = 1.0;
                } else {
                    k[[a, a]] = stay;
                    k[[absorbing, a]] = 1.0 - stay;
                }
            }
        }
        Structure::Cyclic => {
            let circ = cyclic_profile(s, t)?;
            for a in 0..s {
                for b in 0..s {
                    k[[b, a]] = circ[(b + s - a) % s];
                }
            }
        }
        Structure::Ordinal => {
            // basis[p][b] = cos((2b − 1)πω_p) for 1-based b, ω_p = p/(2S)
            let basis: Vec<f64> = (0..s)
                .flat_map(|p| {
                    (0..s).map(move |b| {
                        let phase = ((2 * b + 1) * p) as f64 * PI / (2 * s) as f64;
                        phase.cos()
                    })
                })
                .collect();
            let weights: Vec<f64> = (0..s)
                .map(|p| {
                    let z = if p == 0 { 2.0 } else { 1.0 };
                    2.0 / s as f64 / z * decay(ordinal_eigenvalue(p, s), t)
                })
                .collect();
            for a in 0..s {
                for b in 0..=a {
                    let v: f64 = (0..s).map(|p| weights[p] * basis[p * s + b] * basis[p * s + a]).sum();
                    k[[b, a]] = v;
                    k[[a, b]] = v;
                }
            }
        }
    }
    TransitionKernel::from_entries(structure, t, KernelForm::Exact, k)
}

/// First column of the circulant cyclic kernel: entry `δ` is `q_t(a + δ | a)`.
///
/// The Fourier sum is accumulated as explicit real and imaginary parts; the
/// imaginary part must cancel.
fn cyclic_profile(s: usize, t: f64) -> Result<Vec<f64>> {
    let mut profile = Vec::with_capacity(s);
    let mut worst_imag: f64 = 0.0;
    for delta in 0..s {
        let (mut re, mut im) = (0.0, 0.0);
        for p in 0..s {
            let w = decay(cyclic_eigenvalue(p, s), t);
            // exp(2πi bω) exp(−2πi aω) = exp(2πi (b − a) p / S)
            let phase = 2.0 * PI * ((delta * p) % s) as f64 / s as f64;
            re += phase.cos() * w;
            im += phase.sin() * w;
        }
        re /= s as f64;
        im /= s as f64;
        worst_imag = worst_imag.max(im.abs());
        profile.push(re);
    }
    if worst_imag >= 1e-10 {
        return Err(Error::ImaginaryResidual(worst_imag));
    }
    Ok(profile)
}

/// One explicit Euler step `I + tR`. Requires `t · max|R_aa| ≤ 1`.
pub fn euler_kernel(rate: &RateMatrix, t: f64) -> Result<TransitionKernel> {
    check_time(t)?;
    let s = rate.states();
    let max_diag = (0..s).map(|a| rate.entries[[a, a]].abs()).fold(0.0, f64::max);
    if t * max_diag > 1.0 + 1e-12 {
        return Err(Error::InvalidTime(t));
    }
    let mut k = &rate.entries * t;
    for a in 0..s {
        k[[a, a]] += 1.0;
    }
    TransitionKernel::from_entries(rate.structure, t, KernelForm::Euler, k)
}

/// Reference `exp(tR)` by scaling and squaring a truncated Taylor series.
///
/// Independent of the spectral formulas in [`heat_kernel`]; the two are
/// compared in the test suite.
pub fn matrix_exponential(rate: &RateMatrix, t: f64) -> Result<Array2<f64>> {
    check_time(t)?;
    if t > MAX_ORACLE_TIME || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    let s = rate.states();
    let a = &rate.entries * t;
    let norm = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut result = Array2::<f64>::eye(s);
    let mut term = Array2::<f64>::eye(s);
    for k in 1..64 {
        term = term.dot(&a) / k as f64;
        result += &term;
        let term_norm = term.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if term_norm < f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

/// Boundary map onto `(0, 1]`: periodic for cyclic, even reflection for ordinal.
pub fn boundary_map(structure: Structure, v: f64) -> Result<f64> {
    match structure {
        Structure::Cyclic => Ok(v - v.ceil() + 1.0),
        Structure::Ordinal => {
            let r = v - 2.0 * (v / 2.0).floor();
            Ok(if r <= 1.0 { r } else { 2.0 - r })
        }
        other => Err(Error::InvalidConfig(format!(
            "Gaussian limit is only defined for cyclic and ordinal structures, got {other}"
        ))),
    }
}

/// Fast approximation of the quadratic-rule kernel `q_{S²·t_base}(· | x)`
/// via its large-`S` limit: a Gaussian of variance `2·t_base`, wrapped or
/// reflected onto `(0, 1]` and discretized by `ceil(φ·S)`.
///
/// The Gaussian is centred on the middle of the cell `(x/S, (x+1)/S]` that
/// `ceil` maps back to `x`, so vanishing noise returns `x`. Centring on the
/// cell edge would move half of the mass to the neighbour even as
/// `t_base → 0`; the two choices agree as `S → ∞`.
pub fn sample_gaussian_limit<R: Rng + ?Sized>(
    x: usize,
    states: usize,
    base_time: f64,
    structure: Structure,
    rng: &mut R,
) -> Result<usize> {
    structure.validate(states)?;
    if x >= states {
        return Err(Error::StateOutOfRange { state: x, size: states });
    }
    if !(base_time >= 0.0) || !base_time.is_finite() {
        return Err(Error::InvalidTime(base_time));
    }
    let mean = (x as f64 + 0.5) / states as f64;
    let z: f64 = StandardNormal.sample(rng);
    let xi = mean + (2.0 * base_time).sqrt() * z;
    let phi = boundary_map(structure, xi)?;
    let y = (phi * states as f64).ceil().clamp(1.0, states as f64) as usize;
    Ok(y - 1)
}
