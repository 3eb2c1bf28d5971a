//! Oracles and helpers shared by the integration tests.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use ebm_heat::exact::enumerate_states;
use ebm_heat::{Batch, EnergyModel, StateSchema, TabulatedEnergy};

/// `exp(A)` by scaling to norm ≤ 1/16, a 30-term Taylor series and repeated squaring.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a.rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 1.0 / 16.0 {
        scale /= 2.0;
        squarings += 1;
    }
    let b = a * scale;
    let mut term = Array2::<f64>::eye(n);
    let mut sum = Array2::<f64>::eye(n);
    for k in 1..=30 {
        term = term.dot(&b) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Central differences of `f` at `theta` with step `h`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = t[i];
            t[i] = orig + h;
            let up = f(&t);
            t[i] = orig - h;
            let down = f(&t);
            t[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, tiny)` in the Euclidean norm.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn random_tabulated<R: Rng>(schema: &StateSchema, scale: f64, rng: &mut R) -> TabulatedEnergy {
    let n = schema.space_size().unwrap() as usize;
    let table = (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    TabulatedEnergy::from_table(schema, table).unwrap()
}

/// Random probability vector over the states of `schema`.
pub fn random_distribution<R: Rng>(schema: &StateSchema, rng: &mut R) -> Vec<f64> {
    let n = schema.space_size().unwrap() as usize;
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn all_states(schema: &StateSchema) -> Batch {
    enumerate_states(schema).unwrap()
}

/// CDF on `[0, 1]` of `N(mu, var)` wrapped with period 1, summing ±`images` periods.
pub fn wrapped_normal_cdf(u: f64, mu: f64, var: f64, images: i32) -> f64 {
    let n = Normal::new(0.0, var.sqrt()).unwrap();
    (-images..=images)
        .map(|m| n.cdf(u + m as f64 - mu) - n.cdf(m as f64 - mu))
        .sum()
}

/// CDF on `[0, 1]` of `N(mu, var)` reflected at 0 and 1, summing ±`images` periods.
pub fn reflected_normal_cdf(u: f64, mu: f64, var: f64, images: i32) -> f64 {
    let n = Normal::new(0.0, var.sqrt()).unwrap();
    (-images..=images)
        .map(|m| {
            let c = 2.0 * m as f64;
            n.cdf(c + u - mu) - n.cdf(c - u - mu)
        })
        .sum()
}

/// Kolmogorov–Smirnov distance between the empirical law of cell indices
/// `1..=s` (given as counts) scaled by `1/s` and a continuous CDF on `[0, 1]`.
/// Both one-sided limits at every jump are compared.
pub fn ks_cells(counts: &[usize], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = counts.len();
    let total: usize = counts.iter().sum();
    let mut below = 0usize;
    let mut worst: f64 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let f = cdf((k + 1) as f64 / s as f64);
        worst = worst.max((below as f64 / total as f64 - f).abs());
        below += c;
        worst = worst.max((below as f64 / total as f64 - f).abs());
    }
    worst
}

/// Binomial three-sigma band check for an observed count.
pub fn within_3sigma(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd
}

/// Mean negative log pseudo-likelihood of `p` by brute force over states and coordinates.
pub fn direct_pseudo_likelihood(model: &TabulatedEnergy, p: &[f64], sizes: &[usize]) -> f64 {
    let states = all_states(model.schema());
    let u = model.energy(&states).unwrap();
    let index = |x: &[usize]| x.iter().zip(sizes).fold(0, |acc, (&v, &s)| acc * s + v);
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        let x: Vec<usize> = states.categorical.row(i).to_vec();
        for k in 0..sizes.len() {
            let z: f64 = (0..sizes[k])
                .map(|s| {
                    let mut y = x.clone();
                    y[k] = s;
                    (-u[index(&y)]).exp()
                })
                .sum();
            total += pi * ((-u[i]).exp() / z).ln() * -1.0 / sizes.len() as f64;
        }
    }
    total
}
