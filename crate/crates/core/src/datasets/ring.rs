//! Mixed tabular ring dataset.
//!
//! Each record picks a circle `c ∈ {1, 2, 3, 4}` uniformly, an angle
//! `θ ~ U[0, 2π)` and a radius `c + ε` with `ε ~ N(0, (0.02·c)²)`. Columns:
//! numeric `x`, `y`; categorical `circle` (4 states, uniform structure) and
//! `color` (16 states, cyclic structure) given by the angular sector of `θ`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::kernels::Structure;
use crate::rng::Streams;
use crate::schema::{Batch, Dimension, MixedSample, StateSchema};

pub const CIRCLES: usize = 4;
pub const SECTORS: usize = 16;
/// Radial noise standard deviation relative to the circle radius.
pub const RELATIVE_NOISE: f64 = 0.02;

pub fn ring_schema() -> StateSchema {
    StateSchema::new(vec![
        Dimension::Numeric { name: "x".into() },
        Dimension::Numeric { name: "y".into() },
        Dimension::Categorical {
            name: "circle".into(),
            size: CIRCLES,
            structure: Structure::Uniform,
        },
        Dimension::Categorical {
            name: "color".into(),
            size: SECTORS,
            structure: Structure::Cyclic,
        },
    ])
    .expect("valid ring schema")
}

/// Radius of circle state `c` (0-based).
pub fn circle_radius(c: usize) -> f64 {
    (c + 1) as f64
}

/// Angular sector (0-based) of an angle in radians.
pub fn sector_of(angle: f64) -> usize {
    let a = angle.rem_euclid(2.0 * PI);
    ((a / (2.0 * PI) * SECTORS as f64).floor() as usize).min(SECTORS - 1)
}

pub fn make_ring_tabular(n: usize, streams: Streams) -> (StateSchema, Batch) {
    let rows: Vec<MixedSample> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.index(i as u64).rng();
            let c = rng.random_range(0..CIRCLES);
            let theta = rng.random::<f64>() * 2.0 * PI;
            let r0 = circle_radius(c);
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = r0 + RELATIVE_NOISE * r0 * z;
            MixedSample::new(vec![r * theta.cos(), r * theta.sin()], vec![c, sector_of(theta)])
        })
        .collect();
    let batch = Batch::from_samples(&rows).unwrap_or_else(|_| Batch::zeros(0, 2, 2));
    (ring_schema(), batch)
}

/// Fraction of rows whose radius lies within `k` noise standard deviations
/// of some circle.
pub fn fraction_near_circles(batch: &Batch, k: f64) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let near = (0..batch.len())
        .filter(|&i| {
            let r = batch.numeric[[i, 0]].hypot(batch.numeric[[i, 1]]);
            (0..CIRCLES).any(|c| {
                let r0 = circle_radius(c);
                (r - r0).abs() <= k * RELATIVE_NOISE * r0
            })
        })
        .count();
    near as f64 / batch.len() as f64
}

/// Total-variation distance of the circle column from uniform.
pub fn circle_marginal_tv(batch: &Batch) -> f64 {
    let mut counts = [0usize; CIRCLES];
    for &c in batch.categorical.column(0) {
        counts[c] += 1;
    }
    let n = batch.len().max(1) as f64;
    0.5 * counts.iter().map(|&c| (c as f64 / n - 1.0 / CIRCLES as f64).abs()).sum::<f64>()
}
