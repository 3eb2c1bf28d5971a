mod common;

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{expm, ks_cells, max_abs_diff, reflected_normal_cdf, within_3sigma, wrapped_normal_cdf};
use ebm_heat::kernels::{boundary_map, euler_kernel, sample_gaussian_limit};
use ebm_heat::{build_rate_matrix, heat_kernel, matrix_exponential, Structure};

fn structures_for(s: usize) -> Vec<Structure> {
    let mut v = vec![
        Structure::Uniform,
        Structure::Cyclic,
        Structure::Ordinal,
        Structure::Masking { absorbing: s - 1 },
        Structure::Masking { absorbing: 0 },
    ];
    if s == 2 {
        v.push(Structure::Binary);
    }
    v
}

fn structure_strategy() -> impl Strategy<Value = (Structure, usize)> {
    (2usize..24, 0usize..6).prop_map(|(s, tag)| {
        let st = match tag {
            0 => Structure::Uniform,
            1 => Structure::Cyclic,
            2 => Structure::Ordinal,
            3 => Structure::Masking { absorbing: s / 2 },
            4 if s == 2 => Structure::Binary,
            _ => Structure::Cyclic,
        };
        (st, s)
    })
}

#[test]
fn closed_forms_match_independent_series_oracle() {
    for s in [2, 3, 5, 10, 50] {
        for st in structures_for(s) {
            let r = build_rate_matrix(st, s).unwrap();
            for t in [0.01, 0.1, 1.0, 10.0] {
                let k = heat_kernel(st, s, t).unwrap();
                let oracle = expm(&(&r.entries * t));
                let err = max_abs_diff(k.entries(), &oracle);
                assert!(err <= 1e-8, "{st} S={s} t={t}: {err:e}");
            }
        }
    }
}

#[test]
fn library_oracle_agrees_with_test_oracle() {
    for s in [3, 7, 20] {
        for st in structures_for(s) {
            let r = build_rate_matrix(st, s).unwrap();
            for t in [0.3, 4.0] {
                assert!(max_abs_diff(&matrix_exponential(&r, t).unwrap(), &expm(&(&r.entries * t))) < 1e-10);
            }
        }
    }
    assert!(matrix_exponential(&build_rate_matrix(Structure::Cyclic, 4).unwrap(), 2e6).is_err());
}

#[test]
fn binary_oracle_closed_form() {
    let r = build_rate_matrix(Structure::Binary, 2).unwrap();
    for t in [0.0, 0.2, 1.0, 3.0] {
        let e = matrix_exponential(&r, t).unwrap();
        let stay = 0.5 * (1.0 + (-2.0 * t).exp());
        let flip = 0.5 * (1.0 - (-2.0 * t).exp());
        assert!(max_abs_diff(&e, &ndarray::array![[stay, flip], [flip, stay]]) < 1e-14);
    }
}

#[test]
fn uniform_s5_stay_probability() {
    let k = heat_kernel(Structure::Uniform, 5, 1.0).unwrap();
    let expected = (-1.0f64).exp() + (1.0 - (-1.0f64).exp()) / 5.0;
    assert!((k.prob(2, 2) - expected).abs() < 1e-15);
    assert!((k.prob(2, 2) - 0.49426).abs() < 1e-4);
    let oracle = matrix_exponential(&build_rate_matrix(Structure::Uniform, 5).unwrap(), 1.0).unwrap();
    assert!(max_abs_diff(k.entries(), &oracle) < 1e-10);
}

#[test]
fn cyclic_s4_long_time_is_uniform() {
    let k = heat_kernel(Structure::Cyclic, 4, 10.0).unwrap();
    assert!(k.entries().iter().all(|&v| (v - 0.25).abs() < 1e-4));
}

#[test]
fn rate_matrix_examples() {
    let u = build_rate_matrix(Structure::Uniform, 3).unwrap();
    assert!((u.entries[[0, 0]] + 2.0 / 3.0).abs() < 1e-15 && (u.entries[[1, 0]] - 1.0 / 3.0).abs() < 1e-15);
    let o = build_rate_matrix(Structure::Ordinal, 4).unwrap();
    for a in 0..4 {
        assert_eq!(o.entries.column(a).sum(), 0.0);
    }
    assert!(build_rate_matrix(Structure::Binary, 3).is_err());
    assert!(build_rate_matrix(Structure::Uniform, 1).is_err());
    assert!(build_rate_matrix(Structure::Masking { absorbing: 4 }, 4).is_err());
    assert!(heat_kernel(Structure::Uniform, 4, -1.0).is_err());
}

#[test]
fn cyclic_and_ordinal_eigenvectors() {
    for s in 2..=64 {
        let cyc = build_rate_matrix(Structure::Cyclic, s).unwrap();
        let ord = build_rate_matrix(Structure::Ordinal, s).unwrap();
        for p in 0..s {
            // Fourier modes of the circulant, as real cosine/sine pairs.
            let omega = p as f64 / s as f64;
            let lambda = 2.0 * (2.0 * PI * omega).cos() - 2.0;
            let c = Array1::from_shape_fn(s, |a| (2.0 * PI * omega * a as f64).cos());
            let sn = Array1::from_shape_fn(s, |a| (2.0 * PI * omega * a as f64).sin());
            for v in [c, sn] {
                let res = (cyc.entries.dot(&v) - &v * lambda).iter().map(|x| x.abs()).fold(0.0, f64::max);
                assert!(res <= 1e-10, "cyclic S={s} p={p}: {res:e}");
            }
            // Cosine modes of the path with reflecting ends.
            let omega = p as f64 / (2.0 * s as f64);
            let lambda = 2.0 * (2.0 * PI * omega).cos() - 2.0;
            let v = Array1::from_shape_fn(s, |a| (2.0 * PI * omega * (a as f64 + 0.5)).cos());
            let res = (ord.entries.dot(&v) - &v * lambda).iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(res <= 1e-10, "ordinal S={s} p={p}: {res:e}");
        }
    }
}

#[test]
fn spectral_gaps() {
    for s in [2, 3, 7, 16] {
        let u = build_rate_matrix(Structure::Uniform, s).unwrap();
        assert!((u.spectral_gap() - 1.0).abs() < 1e-10);
        let c = build_rate_matrix(Structure::Cyclic, s).unwrap();
        assert!((c.spectral_gap() - (2.0 - 2.0 * (2.0 * PI / s as f64).cos())).abs() < 1e-10);
    }
}

#[test]
fn euler_kernel_is_first_order() {
    let r = build_rate_matrix(Structure::Uniform, 4).unwrap();
    let t = 1e-4;
    let e = euler_kernel(&r, t).unwrap();
    let exact = heat_kernel(Structure::Uniform, 4, t).unwrap();
    assert!(max_abs_diff(e.entries(), exact.entries()) < 1e-8);
    assert!(euler_kernel(&r, 2.0).is_err());
    let flip = euler_kernel(&build_rate_matrix(Structure::Binary, 2).unwrap(), 1.0).unwrap();
    assert_eq!(flip.entries(), &ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
}

#[test]
fn identity_kernel_sampling() {
    let k = heat_kernel(Structure::Cyclic, 5, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!((0..1000).all(|_| k.sample(2, &mut rng) == 2));
}

#[test]
fn uniform_binary_long_time_is_fair() {
    let k = heat_kernel(Structure::Uniform, 2, 50.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let ones = (0..n).filter(|_| k.sample(0, &mut rng) == 1).count();
    assert!(within_3sigma(ones, n, 0.5), "{ones}");
}

#[test]
fn masking_absorbs() {
    let k = heat_kernel(Structure::Masking { absorbing: 3 }, 4, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hits = (0..10_000).filter(|_| k.sample(1, &mut rng) == 3).count();
    assert!(hits as f64 / 1e4 >= 0.99);
    assert!((k.prob(3, 3) - 1.0).abs() < 1e-15);
    assert!((k.prob(1, 1) - (-10.0f64).exp()).abs() < 1e-15);
}

#[test]
fn gaussian_limit_vanishing_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for st in [Structure::Cyclic, Structure::Ordinal] {
        for x in [0, 7, 15] {
            assert!((0..200).all(|_| sample_gaussian_limit(x, 16, 1e-12, st, &mut rng).unwrap() == x));
        }
    }
    assert!(sample_gaussian_limit(0, 16, 0.1, Structure::Uniform, &mut rng).is_err());
}

fn limit_ks(structure: Structure, x0: usize, draws: usize, seed: u64) -> f64 {
    let s = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; s];
    for _ in 0..draws {
        counts[sample_gaussian_limit(x0, s, 0.05, structure, &mut rng).unwrap()] += 1;
    }
    let mu = (x0 as f64 + 0.5) / s as f64;
    match structure {
        Structure::Cyclic => ks_cells(&counts, |u| wrapped_normal_cdf(u, mu, 0.1, 8)),
        _ => ks_cells(&counts, |u| reflected_normal_cdf(u, mu, 0.1, 8)),
    }
}

#[test]
fn gaussian_limit_matches_wrapped_normal() {
    let ks = limit_ks(Structure::Cyclic, 100, 200_000, 4);
    assert!(ks <= 0.02, "{ks}");
}

#[test]
fn gaussian_limit_matches_reflected_normal_at_boundary() {
    let ks = limit_ks(Structure::Ordinal, 0, 200_000, 5);
    assert!(ks <= 0.02, "{ks}");
}

#[test]
fn boundary_map_ranges() {
    for v in [-3.7, -1.0, -0.2, 0.0, 0.3, 1.0, 1.5, 2.0, 5.25] {
        for st in [Structure::Cyclic, Structure::Ordinal] {
            let u = boundary_map(st, v).unwrap();
            assert!((0.0..=1.0).contains(&u), "{st} {v} -> {u}");
        }
    }
    assert_eq!(boundary_map(Structure::Ordinal, 1.25).unwrap(), 0.75);
    assert_eq!(boundary_map(Structure::Cyclic, 1.25).unwrap(), 0.25);
}

#[test]
fn kernel_csv_layout() {
    let k = heat_kernel(Structure::Cyclic, 8, 0.5).unwrap();
    let mut buf = Vec::new();
    k.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "S,t,structure");
    assert_eq!(lines[1], "8,0.5,cyclic");
    let rows: Vec<Vec<f64>> = lines[2..].iter().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    for a in 0..8 {
        let col: f64 = rows.iter().map(|r| r[a]).sum();
        assert!((col - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn columns_are_distributions((st, s) in structure_strategy(), t in 0.0f64..20.0) {
        let k = heat_kernel(st, s, t).unwrap();
        for a in 0..s {
            let col = k.entries().column(a);
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn symmetric_structures_give_symmetric_kernels((st, s) in structure_strategy(), t in 0.0f64..20.0) {
        let k = heat_kernel(st, s, t).unwrap();
        if st.is_symmetric() {
            prop_assert!(k.is_symmetric(1e-12));
        }
    }

    #[test]
    fn semigroup((st, s) in structure_strategy(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let a = heat_kernel(st, s, t1).unwrap();
        let b = heat_kernel(st, s, t2).unwrap();
        let ab = heat_kernel(st, s, t1 + t2).unwrap();
        let prod: Array2<f64> = a.entries().dot(b.entries());
        prop_assert!(max_abs_diff(&prod, ab.entries()) <= 1e-8);
    }

    #[test]
    fn rate_matrix_is_a_generator((st, s) in structure_strategy()) {
        let r = build_rate_matrix(st, s).unwrap();
        for a in 0..s {
            prop_assert!(r.entries.column(a).sum().abs() < 1e-12);
            for b in 0..s {
                if a == b {
                    prop_assert!(r.entries[[b, a]] <= 0.0);
                } else {
                    prop_assert!(r.entries[[b, a]] >= 0.0);
                }
            }
        }
        if st.is_symmetric() {
            prop_assert_eq!(r.entries.clone(), r.entries.t().to_owned());
        }
    }

    #[test]
    fn zero_time_is_identity((st, s) in structure_strategy()) {
        let k = heat_kernel(st, s, 0.0).unwrap();
        prop_assert!(max_abs_diff(k.entries(), &Array2::eye(s)) <= 1e-12);
    }
}
