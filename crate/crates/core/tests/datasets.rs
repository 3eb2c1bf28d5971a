mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use common::{all_states, within_3sigma};
use ebm_heat::datasets::io::{read_dataset_from, write_dataset_to};
use ebm_heat::datasets::ring::{circle_marginal_tv, circle_radius, fraction_near_circles, sector_of, RELATIVE_NOISE};
use ebm_heat::datasets::toy::on_checkerboard;
use ebm_heat::datasets::{generate, make_discrete_dataset, make_ising_dataset, make_ring_tabular, CodeSpec, Coding, IsingSpec, ToyDistribution};
use ebm_heat::datasets::DatasetSpec;
use ebm_heat::exact::exact_probabilities;
use ebm_heat::{Batch, IsingEnergy, NumericScaler, StateSchema, Streams};

#[test]
fn eight_gaussians_modes_and_mean() {
    let pts = ToyDistribution::EightGaussians.sample(100_000, Streams::new(1));
    for p in &pts {
        let near = (0..8).any(|k| {
            let a = k as f64 * PI / 4.0;
            (p[0] - 2.0 * a.cos()).hypot(p[1] - 2.0 * a.sin()) <= 4.0 * 0.25 * 2f64.sqrt()
        });
        assert!(near, "{p:?}");
    }
    // Per-coordinate variance is 2 (mode spread) + 0.0625 (noise).
    let se = ((2.0 + 0.0625) / pts.len() as f64).sqrt();
    for c in 0..2 {
        let mean = pts.iter().map(|p| p[c]).sum::<f64>() / pts.len() as f64;
        assert!(mean.abs() <= 3.0 * se, "{mean}");
    }
}

#[test]
fn checkerboard_membership() {
    for p in ToyDistribution::Checkerboard.sample(20_000, Streams::new(2)) {
        assert!(on_checkerboard(p), "{p:?}");
    }
}

#[test]
fn all_toys_stay_in_the_box_and_are_reproducible() {
    for dist in ToyDistribution::ALL {
        let a = dist.sample(2000, Streams::new(3));
        assert!(a.iter().all(|p| p[0].abs() <= 4.0 && p[1].abs() <= 4.0), "{dist}");
        assert_eq!(a, dist.sample(2000, Streams::new(3)));
        assert_eq!(dist.name().parse::<ToyDistribution>().unwrap(), dist);
    }
}

#[test]
fn gray_examples_and_full_round_trip() {
    let four = CodeSpec::new(2, 4, Coding::Gray).unwrap();
    assert_eq!(four.encode_bin(3), vec![0, 0, 1, 0]);
    let spec = CodeSpec::new(2, 16, Coding::Gray).unwrap();
    let mut prev = spec.encode_bin(0);
    assert_eq!(spec.decode_bin(&prev).unwrap(), 0);
    for n in 1..(1u64 << 16) {
        let code = spec.encode_bin(n);
        assert_eq!(spec.decode_bin(&code).unwrap(), n);
        let changed = code.iter().zip(&prev).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 1, "{n}");
        prev = code;
    }
}

#[test]
fn every_digit_vector_survives_decode_then_encode() {
    for spec in [CodeSpec::new(2, 10, Coding::Gray).unwrap(), CodeSpec::new(3, 6, Coding::Positional).unwrap()] {
        let schema = StateSchema::categorical(spec.digits, spec.base, ebm_heat::Structure::Uniform).unwrap();
        for row in all_states(&schema).categorical.rows() {
            let digits = row.to_vec();
            let v = spec.decode_coord(&digits).unwrap();
            assert_eq!(spec.encode_coord(v), digits);
        }
    }
}

#[test]
fn positional_examples_and_presets() {
    assert_eq!(CodeSpec::base5().encode_bin(7), vec![0, 0, 0, 0, 0, 0, 1, 2]);
    for (spec, d, s) in [(CodeSpec::gray16(), 32, 2), (CodeSpec::base5(), 16, 5), (CodeSpec::base10(), 12, 10)] {
        let (schema, batch) = make_discrete_dataset(ToyDistribution::Moons, &spec, 100, Streams::new(4));
        assert_eq!(schema.categorical_dims(), d);
        assert!(schema.categorical_sizes().iter().all(|&k| k == s));
        assert_eq!(batch.categorical.dim(), (100, d));
        assert!(batch.categorical.iter().all(|&v| v < s));
    }
}

#[test]
fn decoded_points_are_within_half_a_bin() {
    let spec = CodeSpec::gray16();
    let pts = ToyDistribution::TwoSpirals.sample(500, Streams::new(5));
    let decoded = spec.decode_batch(&spec.encode_points(&pts)).unwrap();
    let half = 4.0 / spec.bins() as f64;
    for (p, q) in pts.iter().zip(&decoded) {
        assert!((p[0] - q[0]).abs() <= half + 1e-12 && (p[1] - q[1]).abs() <= half + 1e-12);
    }
}

#[test]
fn ring_marginal_radius_and_color() {
    let n = 40_000;
    let (schema, batch) = make_ring_tabular(n, Streams::new(6));
    assert_eq!((schema.numeric_dims(), schema.categorical_sizes()), (2, vec![4, 16]));
    let mut counts = [0usize; 4];
    for &c in batch.categorical.column(0) {
        counts[c] += 1;
    }
    let expected = n as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 3 degrees of freedom.
    assert!(chi2 < 16.27, "{chi2}");
    assert!(circle_marginal_tv(&batch) < 0.02);

    let near = (0..n)
        .filter(|&i| {
            let r0 = circle_radius(batch.categorical[[i, 0]]);
            let r = batch.numeric[[i, 0]].hypot(batch.numeric[[i, 1]]);
            (r - r0).abs() <= 3.0 * RELATIVE_NOISE * r0
        })
        .count();
    // Two-sided 3σ mass of a normal distribution.
    assert!(within_3sigma(near, n, 0.9973), "{near}");
    assert!(fraction_near_circles(&batch, 3.0) >= near as f64 / n as f64);

    for i in 0..n {
        let angle = batch.numeric[[i, 1]].atan2(batch.numeric[[i, 0]]);
        // Noise is radial, so the angle and its sector are unaffected.
        let sector = sector_of(angle);
        let label = batch.categorical[[i, 1]];
        let on_edge = ((angle.rem_euclid(2.0 * PI) / (2.0 * PI) * 16.0).fract() - 0.5).abs() > 0.5 - 1e-9;
        assert!(sector == label || on_edge, "{i}: sector {sector} label {label}");
    }
}

#[test]
fn independent_spins_at_zero_coupling() {
    let n = 4000;
    let spec = IsingSpec { side: 3, sigma: 0.0 };
    let (_, batch, j) = make_ising_dataset(&spec, n, 100, Streams::new(7)).unwrap();
    assert!(j.iter().all(|&v| v == 0.0));
    for k in 0..9 {
        let ups = batch.categorical.column(k).iter().filter(|&&v| v == 1).count();
        assert!(within_3sigma(ups, n, 0.5), "site {k}: {ups}");
    }
}

#[test]
fn ising_4x4_neighbour_correlation_matches_enumeration() {
    let spec = IsingSpec { side: 4, sigma: 0.2 };
    let n = 4000;
    let (schema, batch, j) = make_ising_dataset(&spec, n, 20_000, Streams::new(8)).unwrap();
    assert!(batch.categorical.iter().all(|&v| v <= 1));
    let a = spec.adjacency();
    assert_eq!(a, a.t());
    assert!((0..16).all(|i| a.row(i).sum() <= 4.0 && a[[i, i]] == 0.0));
    let edges: Vec<(usize, usize)> = (0..16).flat_map(|i| (i + 1..16).map(move |k| (i, k))).filter(|&(i, k)| a[[i, k]] == 1.0).collect();
    assert_eq!(edges.len(), 24);
    let corr = |row: ndarray::ArrayView1<usize>| {
        let s: Vec<f64> = row.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        edges.iter().map(|&(i, k)| s[i] * s[k]).sum::<f64>() / edges.len() as f64
    };
    let model = IsingEnergy::from_couplings(&schema, &j).unwrap();
    let p = exact_probabilities(&model).unwrap();
    let states = all_states(&schema);
    let truth: f64 = states.categorical.rows().into_iter().zip(&p).map(|(r, w)| w * corr(r)).sum();
    let vals: Vec<f64> = batch.categorical.rows().into_iter().map(corr).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    assert!(truth > 0.0 && mean > 0.0);
    assert!((mean - truth).abs() <= 3.0 * sd / (n as f64).sqrt(), "{mean} vs {truth}");
}

#[test]
fn dataset_files_round_trip() {
    let specs = [
        DatasetSpec::Toy {
            dist: ToyDistribution::Pinwheel,
            code: CodeSpec::base5(),
        },
        DatasetSpec::Ring,
        DatasetSpec::Ising {
            side: 3,
            sigma: 0.1,
            gibbs_steps: 50,
        },
    ];
    for spec in specs {
        let g = generate(&spec, 300, Streams::new(9)).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &g.schema, &g.batch).unwrap();
        let (schema, batch) = read_dataset_from(buf.as_slice()).unwrap();
        assert_eq!(schema, g.schema);
        assert_eq!(batch, g.batch);
        let mut again = Vec::new();
        write_dataset_to(&mut again, &schema, &batch).unwrap();
        assert_eq!(buf, again);
    }
}

#[test]
fn scaler_standardizes_ring_columns() {
    let (_, batch) = make_ring_tabular(5000, Streams::new(8));
    let scaler = NumericScaler::fit(&batch).unwrap();
    // E[x²] = E[r²]/2 = 3.75 for radii 1..4 with uniform angle.
    for &s in &scaler.std {
        assert!((s - 3.75f64.sqrt()).abs() < 0.05, "{s}");
    }
    let z = scaler.transform(&batch).unwrap();
    for col in z.numeric.columns() {
        assert!(col.mean().unwrap().abs() < 1e-12);
        assert!((col.std(0.0) - 1.0).abs() < 1e-12);
    }
    assert_eq!(z.categorical, batch.categorical);

    let constant = Batch::new(ndarray::Array2::from_elem((3, 1), 2.5), ndarray::Array2::zeros((3, 0))).unwrap();
    let flat = NumericScaler::fit(&constant).unwrap();
    assert_eq!((flat.mean[0], flat.std[0]), (2.5, 1.0));
    assert!(NumericScaler::fit(&Batch::zeros(0, 2, 0)).is_err());
    assert!(scaler.transform(&constant).is_err());
}

proptest! {
    #[test]
    fn scaler_inverse_round_trips(vals in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        let n = vals.len();
        let numeric = ndarray::Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { vals[i] } else { vals[n - 1 - i] * 0.01 });
        let batch = Batch::new(numeric, ndarray::Array2::zeros((n, 0))).unwrap();
        let scaler = NumericScaler::fit(&batch).unwrap();
        let back = scaler.inverse(&scaler.transform(&batch).unwrap()).unwrap();
        for (a, b) in back.numeric.iter().zip(batch.numeric.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn quantization_is_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        for spec in [CodeSpec::gray16(), CodeSpec::base5(), CodeSpec::base10()] {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(spec.bin(lo) <= spec.bin(hi));
        }
    }

    #[test]
    fn numeric_values_round_trip_bit_exactly(vals in prop::collection::vec(-1e6f64..1e6, 1..40)) {
        let (schema, _) = make_ring_tabular(1, Streams::new(0));
        let n = vals.len();
        let numeric = ndarray::Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { vals[i] } else { vals[i] * 1e-7 });
        let categorical = ndarray::Array2::from_shape_fn((n, 2), |(i, j)| (i * 7 + j) % if j == 0 { 4 } else { 16 });
        let batch = Batch::new(numeric, categorical).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &schema, &batch).unwrap();
        let (_, back) = read_dataset_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, batch);
    }

    #[test]
    fn encode_decode_within_bin(v in -4.0f64..4.0) {
        let spec = CodeSpec::base10();
        let back = spec.decode_coord(&spec.encode_coord(v)).unwrap();
        prop_assert!((back - v).abs() <= 4.0 / spec.bins() as f64 + 1e-12);
    }
}
