//! Two-dimensional toy distributions.
//!
//! Parametrizations follow the usual 2D density-estimation suite:
//!
//! * `2spirals`: `n = sqrt(u)·3π`, arm `(−n cos n + u₁/2, n sin n + u₂/2)`,
//!   mirrored with probability ½, divided by 3, plus `N(0, 0.1²)` noise.
//! * `8gaussians`: modes at radius 2 and angles `kπ/4`, isotropic std 0.25.
//! * `circles`: two concentric circles of radius 3 and 1.5 with noise 0.24.
//! * `moons`: two interleaved half circles, noise 0.1, scaled by 2 and
//!   shifted by `(−1, −0.2)`.
//! * `pinwheel`: five arms, radial std 0.3, tangential std 0.1, rate 0.25,
//!   scaled by 2.
//! * `swissroll`: `t = 1.5π(1 + 2u)`, `(t cos t, t sin t) + N(0, 1)`, divided by 5.
//! * `checkerboard`: uniform on alternating 2×2 cells of `[−4, 4]²`.
//!
//! Points outside `[−4, 4]²` are redrawn, so every sample lies in the box.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{StreamRng, Streams};

/// Half-width of the box all toy samples live in.
pub const BOX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ToyDistribution {
    TwoSpirals,
    EightGaussians,
    Circles,
    Moons,
    Pinwheel,
    SwissRoll,
    Checkerboard,
}

impl ToyDistribution {
    pub const ALL: [ToyDistribution; 7] = [
        ToyDistribution::TwoSpirals,
        ToyDistribution::EightGaussians,
        ToyDistribution::Circles,
        ToyDistribution::Moons,
        ToyDistribution::Pinwheel,
        ToyDistribution::SwissRoll,
        ToyDistribution::Checkerboard,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ToyDistribution::TwoSpirals => "2spirals",
            ToyDistribution::EightGaussians => "8gaussians",
            ToyDistribution::Circles => "circles",
            ToyDistribution::Moons => "moons",
            ToyDistribution::Pinwheel => "pinwheel",
            ToyDistribution::SwissRoll => "swissroll",
            ToyDistribution::Checkerboard => "checkerboard",
        }
    }

    fn draw(&self, rng: &mut StreamRng) -> [f64; 2] {
        let normal = |rng: &mut StreamRng| -> f64 { StandardNormal.sample(rng) };
        match self {
            ToyDistribution::TwoSpirals => {
                let u: f64 = rng.random();
                let n = u.sqrt() * 540.0 * (2.0 * PI) / 360.0;
                let x = -n.cos() * n + rng.random::<f64>() * 0.5;
                let y = n.sin() * n + rng.random::<f64>() * 0.5;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                [sign * x / 3.0 + 0.1 * normal(rng), sign * y / 3.0 + 0.1 * normal(rng)]
            }
            ToyDistribution::EightGaussians => {
                let k = rng.random_range(0..8) as f64;
                let angle = k * PI / 4.0;
                [2.0 * angle.cos() + 0.25 * normal(rng), 2.0 * angle.sin() + 0.25 * normal(rng)]
            }
            ToyDistribution::Circles => {
                let r = if rng.random::<bool>() { 1.0 } else { 0.5 };
                let a = rng.random::<f64>() * 2.0 * PI;
                [3.0 * (r * a.cos() + 0.08 * normal(rng)), 3.0 * (r * a.sin() + 0.08 * normal(rng))]
            }
            ToyDistribution::Moons => {
                let a = rng.random::<f64>() * PI;
                let (x, y) = if rng.random::<bool>() {
                    (a.cos(), a.sin())
                } else {
                    (1.0 - a.cos(), 1.0 - a.sin() - 0.5)
                };
                [2.0 * (x + 0.1 * normal(rng)) - 1.0, 2.0 * (y + 0.1 * normal(rng)) - 0.2]
            }
            ToyDistribution::Pinwheel => {
                let class = rng.random_range(0..5) as f64;
                let f0 = 0.3 * normal(rng) + 1.0;
                let f1 = 0.1 * normal(rng);
                let angle = class * 2.0 * PI / 5.0 + 0.25 * f0.exp();
                let (s, c) = angle.sin_cos();
                [2.0 * (f0 * c + f1 * s), 2.0 * (-f0 * s + f1 * c)]
            }
            ToyDistribution::SwissRoll => {
                let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
                [(t * t.cos() + normal(rng)) / 5.0, (t * t.sin() + normal(rng)) / 5.0]
            }
            ToyDistribution::Checkerboard => {
                let x1 = rng.random::<f64>() * 4.0 - 2.0;
                let x2 = rng.random::<f64>() - 2.0 * rng.random_range(0..2) as f64 + x1.floor().rem_euclid(2.0);
                [2.0 * x1, 2.0 * x2]
            }
        }
    }

    /// One point, redrawn until it falls inside `[−4, 4]²`.
    pub fn sample_one(&self, rng: &mut StreamRng) -> [f64; 2] {
        loop {
            let p = self.draw(rng);
            if p[0].abs() <= BOX && p[1].abs() <= BOX {
                return p;
            }
        }
    }

    /// `n` i.i.d. points; point `i` uses the substream `streams.index(i)`.
    pub fn sample(&self, n: usize, streams: Streams) -> Vec<[f64; 2]> {
        (0..n)
            .into_par_iter()
            .map(|i| self.sample_one(&mut streams.index(i as u64).rng()))
            .collect()
    }
}

impl fmt::Display for ToyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown toy distribution '{s}'")))
    }
}

impl From<ToyDistribution> for String {
    fn from(d: ToyDistribution) -> Self {
        d.name().to_string()
    }
}

impl TryFrom<String> for ToyDistribution {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Whether a point lies on the checkerboard support.
pub fn on_checkerboard(p: [f64; 2]) -> bool {
    ((p[0] / 2.0).floor() + (p[1] / 2.0).floor()).rem_euclid(2.0) == 0.0
}
