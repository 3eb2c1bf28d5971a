mod common;

use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{all_states, random_tabulated, within_3sigma};
use ebm_heat::datasets::IsingSpec;
use ebm_heat::exact::{exact_probabilities, state_index};
use ebm_heat::samplers::{
    chain_rngs, gibbs_site_update, gibbs_site_update_one, initial_chains, langevin_step, sample_chain, SamplerConfig,
    SweepOrder,
};
use ebm_heat::{Batch, Dimension, EnergyModel, IsingEnergy, MixedSample, Result, StateSchema, Streams, Structure, TabulatedEnergy};

/// `U(x) = ‖x‖² / 2` on a purely numeric space.
#[derive(Clone)]
struct Quadratic {
    schema: StateSchema,
    params: Vec<f64>,
}

impl Quadratic {
    fn new(d: usize) -> Self {
        let dims = (0..d).map(|i| Dimension::Numeric { name: format!("x{i}") }).collect();
        Self {
            schema: StateSchema::new(dims).unwrap(),
            params: Vec::new(),
        }
    }
}

impl EnergyModel for Quadratic {
    type Tape = ();

    fn schema(&self) -> &StateSchema {
        &self.schema
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    fn forward(&self, batch: &Batch) -> Result<(Array1<f64>, ())> {
        Ok((batch.numeric.rows().into_iter().map(|r| 0.5 * r.dot(&r)).collect(), ()))
    }
    fn backward(&self, _: &(), _: &[f64]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
    fn input_gradient(&self, batch: &Batch) -> Result<Array2<f64>> {
        Ok(batch.numeric.clone())
    }
}

fn ising_4x4() -> (IsingEnergy, StateSchema) {
    let spec = IsingSpec { side: 4, sigma: 0.2 };
    let schema = StateSchema::spins(16);
    (IsingEnergy::from_couplings(&schema, &spec.couplings()).unwrap(), schema)
}

#[test]
fn constant_energy_gibbs_is_uniform() {
    let schema = StateSchema::categorical(2, 5, Structure::Uniform).unwrap();
    let model = TabulatedEnergy::zeros(&schema).unwrap();
    let n = 100_000;
    let mut rngs = chain_rngs(Streams::new(1), n);
    let mut chains = Batch::zeros(n, 0, 2);
    gibbs_site_update(&model, &mut chains, 1, &mut rngs).unwrap();
    let mut counts = [0usize; 5];
    for i in 0..n {
        counts[chains.categorical[[i, 1]]] += 1;
        assert_eq!(chains.categorical[[i, 0]], 0);
    }
    let expected = n as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 4 degrees of freedom.
    assert!(chi2 < 18.47, "{chi2} {counts:?}");
}

#[test]
fn two_spin_conditional() {
    let sigma = 0.2;
    let schema = StateSchema::spins(2);
    let model = IsingEnergy::from_couplings(&schema, &array![[0.0, sigma], [sigma, 0.0]]).unwrap();
    for (x2, s2) in [(1usize, 1.0f64), (0, -1.0)] {
        // p(x₁ = +1 | x₂) from U = −2σ x₁x₂.
        let p_up = 1.0 / (1.0 + (-4.0 * sigma * s2).exp());
        let n = 40_000;
        let mut rngs = chain_rngs(Streams::new(2 + x2 as u64), n);
        let mut chains = Batch::from_categorical(Array2::from_shape_fn((n, 2), |(_, k)| if k == 1 { x2 } else { 0 }));
        gibbs_site_update(&model, &mut chains, 0, &mut rngs).unwrap();
        let ups = (0..n).filter(|&i| chains.categorical[[i, 0]] == 1).count();
        assert!(within_3sigma(ups, n, p_up), "x2={s2}: {ups} of {n}, p={p_up}");
    }
}

#[test]
fn hard_mode_is_selected() {
    let schema = StateSchema::categorical(1, 6, Structure::Uniform).unwrap();
    let mut table = vec![0.0; 6];
    table[4] = -100.0;
    let model = TabulatedEnergy::from_table(&schema, table).unwrap();
    let mut rng = Streams::new(4).rng();
    let x = MixedSample::categorical(vec![0]);
    let hits = (0..10_000).filter(|_| gibbs_site_update_one(&model, &x, 0, &mut rng).unwrap().categorical[0] == 4).count();
    assert!(hits as f64 / 1e4 >= 0.999);
}

#[test]
fn gibbs_satisfies_detailed_balance() {
    let schema = StateSchema::categorical(2, 3, Structure::Uniform).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_tabulated(&schema, 1.5, &mut rng);
    let pi = exact_probabilities(&model).unwrap();
    let states = all_states(&schema);
    let sizes = [3, 3];
    let n = 30_000;
    let s = states.len();
    // Random-scan kernel: coordinate k with probability ½, then a Gibbs move.
    let mut t = vec![vec![0.0; s]; s];
    let mut counts = vec![vec![0usize; s]; s];
    for a in 0..s {
        let mut chains = Batch::from_categorical(Array2::from_shape_fn((n, 2), |(_, k)| states.categorical[[a, k]]));
        let mut rngs = chain_rngs(Streams::new(6).index(a as u64), n);
        let (first, second) = chains.categorical.view().split_at(ndarray::Axis(0), n / 2);
        let (first, second) = (first.to_owned(), second.to_owned());
        let mut b0 = Batch::from_categorical(first);
        let mut b1 = Batch::from_categorical(second);
        gibbs_site_update(&model, &mut b0, 0, &mut rngs[..n / 2]).unwrap();
        gibbs_site_update(&model, &mut b1, 1, &mut rngs[n / 2..]).unwrap();
        chains = Batch::concat(&[b0, b1]).unwrap();
        for i in 0..n {
            let b = state_index(&sizes, chains.categorical.row(i).as_slice().unwrap());
            counts[a][b] += 1;
        }
        for b in 0..s {
            t[a][b] = counts[a][b] as f64 / n as f64;
        }
    }
    for a in 0..s {
        for b in 0..s {
            let lhs = pi[a] * t[a][b];
            let rhs = pi[b] * t[b][a];
            let var_a = t[a][b] * (1.0 - t[a][b]) / n as f64;
            let var_b = t[b][a] * (1.0 - t[b][a]) / n as f64;
            let sd = (pi[a] * pi[a] * var_a + pi[b] * pi[b] * var_b).sqrt();
            assert!((lhs - rhs).abs() <= 3.0 * sd + 1e-15, "{a}->{b}: {lhs} vs {rhs} (sd {sd})");
        }
    }
}

#[test]
fn langevin_quadratic_stationary_variance() {
    let model = Quadratic::new(1);
    let n = 100;
    let mut rngs = chain_rngs(Streams::new(7), n);
    let mut chains = initial_chains(model.schema(), &mut rngs);
    let steps = 100_000 / n * 10;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    for step in 0..steps {
        langevin_step(&model, &mut chains, 0.01, &mut rngs).unwrap();
        if step >= steps / 2 {
            for v in chains.numeric.iter() {
                sum += v;
                sum_sq += v * v;
                count += 1.0;
            }
        }
    }
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    assert!((var - 1.0).abs() <= 0.1, "{var}");
}

#[test]
fn langevin_without_step_or_gradient_leaves_state() {
    let model = Quadratic::new(2);
    let mut rngs = chain_rngs(Streams::new(8), 3);
    let mut chains = initial_chains(model.schema(), &mut rngs);
    let before = chains.clone();
    langevin_step(&model, &mut chains, 1e-300, &mut rngs).unwrap();
    assert_eq!(chains, before);
    assert!(langevin_step(&model, &mut chains, 0.0, &mut rngs).is_err());
}

#[test]
fn two_state_marginal() {
    let schema = StateSchema::categorical(1, 2, Structure::Uniform).unwrap();
    let model = TabulatedEnergy::from_table(&schema, vec![0.0, 3f64.ln()]).unwrap();
    let cfg = SamplerConfig {
        rounds: 50,
        ..SamplerConfig::default()
    };
    let n = 10_000;
    let out = sample_chain(&model, &cfg, n, Streams::new(9)).unwrap();
    let zeros = out.categorical.iter().filter(|&&v| v == 0).count();
    // State 0 has weight 1, state 1 weight 1/3: p(state 0) = 0.75.
    assert!(within_3sigma(zeros, n, 0.75), "{zeros}");
}

#[test]
fn zero_rounds_return_initial_draws() {
    let (model, schema) = ising_4x4();
    let cfg = SamplerConfig {
        rounds: 0,
        ..SamplerConfig::default()
    };
    let out = sample_chain(&model, &cfg, 50, Streams::new(10)).unwrap();
    let mut rngs = chain_rngs(Streams::new(10), 50);
    assert_eq!(out, initial_chains(&schema, &mut rngs));
}

fn ising_statistics(batch: &Batch, spec: &IsingSpec) -> Vec<(f64, f64)> {
    // Per-chain magnetization and mean nearest-neighbour product.
    let a = spec.adjacency();
    let edges: Vec<(usize, usize)> = (0..16).flat_map(|i| (i + 1..16).map(move |j| (i, j))).filter(|&(i, j)| a[[i, j]] != 0.0).collect();
    batch
        .categorical
        .rows()
        .into_iter()
        .map(|r| {
            let s: Vec<f64> = r.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
            let m = s.iter().sum::<f64>() / 16.0;
            let c = edges.iter().map(|&(i, j)| s[i] * s[j]).sum::<f64>() / edges.len() as f64;
            (m, c)
        })
        .collect()
}

#[test]
fn ising_4x4_matches_enumeration() {
    let spec = IsingSpec { side: 4, sigma: 0.2 };
    let (model, schema) = ising_4x4();
    let exact = {
        let states = all_states(&schema);
        let p = exact_probabilities(&model).unwrap();
        let stats = ising_statistics(&states, &spec);
        let m: f64 = stats.iter().zip(&p).map(|((m, _), w)| m * w).sum();
        let c: f64 = stats.iter().zip(&p).map(|((_, c), w)| c * w).sum();
        (m, c)
    };
    let cfg = SamplerConfig {
        rounds: 100,
        ..SamplerConfig::default()
    };
    let n = 4000;
    let out = sample_chain(&model, &cfg, n, Streams::new(11)).unwrap();
    let stats = ising_statistics(&out, &spec);
    for (idx, truth) in [(0usize, exact.0), (1, exact.1)] {
        let vals: Vec<f64> = stats.iter().map(|s| if idx == 0 { s.0 } else { s.1 }).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((mean - truth).abs() <= 3.0 * sd / (n as f64).sqrt(), "stat {idx}: {mean} vs {truth}");
    }
    assert!(exact.1 > 0.0);
}

#[test]
fn chains_are_identical_across_thread_counts() {
    let (model, _) = ising_4x4();
    let cfg = SamplerConfig {
        rounds: 5,
        order: SweepOrder::Random,
        ..SamplerConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_chain(&model, &cfg, 300, Streams::new(12)).unwrap())
    };
    assert_eq!(run(1), run(3));
    // A chain does not depend on how many chains run next to it.
    let few = sample_chain(&model, &cfg, 10, Streams::new(12)).unwrap();
    assert_eq!(few, run(2).slice_rows(0, 10));
}

#[test]
fn mixed_rounds_touch_both_blocks() {
    use ebm_heat::datasets::make_ring_tabular;
    use ebm_heat::{MlpEnergy, MlpSpec};
    let (schema, _) = make_ring_tabular(1, Streams::new(0));
    let model = MlpEnergy::new(&schema, MlpSpec::tabular(), &mut Streams::new(13).rng()).unwrap();
    let init = sample_chain(&model, &SamplerConfig { rounds: 0, ..SamplerConfig::default() }, 20, Streams::new(14)).unwrap();
    let out = sample_chain(&model, &SamplerConfig { rounds: 3, ..SamplerConfig::default() }, 20, Streams::new(14)).unwrap();
    assert_ne!(init.numeric, out.numeric);
    assert!(out.numeric.iter().all(|v| v.is_finite()));
    let bad = SamplerConfig {
        step_size: 0.0,
        ..SamplerConfig::default()
    };
    assert!(sample_chain(&model, &bad, 2, Streams::new(0)).is_err());
}
