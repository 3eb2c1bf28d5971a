use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ebm_heat::cli::RunConfig;
use ebm_heat::datasets::{read_dataset, read_matrix};
use ebm_heat::models::read_checkpoint;
use ebm_heat::{AnyModel, EnergyModel, NumericScaler, Streams};

fn ebm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebm-heat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ebm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small configuration so that training stays fast.
const SMALL: &str = r#"
seed = 3
n = 400

[dataset]
kind = "toy"
dist = "2spirals"
code = "gray16"

[model]
kind = "mlp"
hidden = [16, 16]
encoding = { kind = "raw" }

[train]
steps = 10
batch_size = 32

[sampler]
rounds = 3
"#;

fn write_small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn kernel_csv_columns_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["kernel", "--structure", "cyclic", "--S", "8", "--t", "0.5", "--out", p(dir.path())]);
    let text = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(2).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == 8));
    for a in 0..8 {
        assert!((rows.iter().map(|r| r[a]).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "kernel");
    assert_eq!(manifest["outputs"][0], "kernel.csv");
}

#[test]
fn gen_data_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = |d: &Path, seed: &'static str| {
        vec!["gen-data", "--toy", "2spirals", "--code", "gray16", "--n", "10000", "--seed", seed, "--out"]
            .into_iter()
            .map(String::from)
            .chain([p(d).to_string()])
            .collect::<Vec<_>>()
    };
    for (d, seed) in [(a.path(), "1"), (b.path(), "1"), (c.path(), "2")] {
        let args = args(d, seed);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let fa = fs::read(a.path().join("data.csv")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("data.csv")).unwrap());
    assert_ne!(fa, fs::read(c.path().join("data.csv")).unwrap());
    let (schema, batch) = read_dataset(&a.path().join("data.csv")).unwrap();
    assert_eq!(batch.categorical.dim(), (10_000, 32));
    assert!(schema.is_binary());
}

#[test]
fn gen_data_ising_writes_spins_and_couplings() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-data", "--ising", "4", "--sigma", "0.2", "--gibbs-steps", "2000", "--n", "2000", "--out", p(dir.path())]);
    let (_, batch) = read_dataset(&dir.path().join("data.csv")).unwrap();
    assert_eq!(batch.categorical.dim(), (2000, 16));
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert!(text.lines().skip(2).all(|l| l.split(',').all(|v| v == "1" || v == "-1")));
    let j = read_matrix(&dir.path().join("couplings.csv")).unwrap();
    assert_eq!(j.dim(), (16, 16));
    assert_eq!(j.iter().filter(|&&v| v == 0.2).count(), 48);
}

#[test]
fn mmd_of_a_file_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-data", "--toy", "moons", "--n", "300", "--out", p(dir.path())]);
    let data = dir.path().join("data.csv");
    let out = ok(&["eval", "--metric", "mmd", "--samples", p(&data), "--against", p(&data), "--estimator", "biased", "--out", p(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("mmd = 0"));
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("mmd,0,"));
}

#[test]
fn zero_step_checkpoint_is_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    ok(&["train", "--config", &config, "--steps", "0", "--out", p(dir.path())]);
    let ckpt = read_checkpoint(&dir.path().join("checkpoint.txt")).unwrap();
    let cfg = RunConfig::load(Path::new(&config)).unwrap();
    let schema = ckpt.model.schema().clone();
    let init = AnyModel::new(&cfg.model_for(&schema), &schema, &mut Streams::new(cfg.seed).child("init").rng()).unwrap();
    assert_eq!(ckpt.model.params(), init.params());
    assert_eq!(ckpt.step, 0);
}

#[test]
fn mixed_data_is_standardized_and_samples_are_mapped_back() {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    ok(&["gen-data", "--ring", "--n", "300", "--seed", "4", "--out", d]);
    let data = dir.path().join("data.csv");
    ok(&["--preset", "ring", "train", "--data", p(&data), "--steps", "0", "--out", d]);
    let ckpt = read_checkpoint(&dir.path().join("checkpoint.txt")).unwrap();
    let (_, batch) = read_dataset(&data).unwrap();
    let scaler = ckpt.scaler.expect("mixed data gets a scaler");
    assert_eq!(scaler, NumericScaler::fit(&batch).unwrap());

    // Zero rounds return the standard normal start, mapped to data scale.
    ok(&["--preset", "ring", "sample", "--checkpoint", &format!("{d}/checkpoint.txt"), "--n", "4000", "--rounds", "0", "--out", d]);
    let (_, samples) = read_dataset(&dir.path().join("samples.csv")).unwrap();
    for (j, col) in samples.numeric.columns().into_iter().enumerate() {
        let sd = col.std(0.0);
        assert!((sd / scaler.std[j] - 1.0).abs() < 0.05, "column {j}: {sd} vs {}", scaler.std[j]);
        assert!((col.mean().unwrap() - scaler.mean[j]).abs() < 0.1 * scaler.std[j]);
    }
}

fn losses(path: &Path) -> Vec<(u64, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string())
        })
        .collect()
}

#[test]
fn resumed_training_continues_the_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let full = dir.path().join("full");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    ok(&["gen-data", "--config", &config, "--out", p(dir.path())]);
    let data = dir.path().join("data.csv");
    ok(&["train", "--config", &config, "--data", p(&data), "--steps", "10", "--out", p(&full)]);
    ok(&["train", "--config", &config, "--data", p(&data), "--steps", "4", "--out", p(&first)]);
    let resume = first.join("checkpoint.txt");
    ok(&["train", "--config", &config, "--data", p(&data), "--steps", "6", "--resume", p(&resume), "--out", p(&second)]);
    let mut joined = losses(&first.join("train_log.csv"));
    joined.extend(losses(&second.join("train_log.csv")));
    assert_eq!(joined, losses(&full.join("train_log.csv")));
    let a = read_checkpoint(&full.join("checkpoint.txt")).unwrap();
    let b = read_checkpoint(&second.join("checkpoint.txt")).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(b.step, 10);
}

fn pipeline(dir: &Path, config: &str) -> String {
    ok(&["gen-data", "--config", config, "--out", p(dir)]);
    let data = dir.join("data.csv");
    ok(&["train", "--config", config, "--data", p(&data), "--out", p(dir)]);
    let ckpt = dir.join("checkpoint.txt");
    ok(&["sample", "--config", config, "--checkpoint", p(&ckpt), "--n", "60", "--out", p(dir)]);
    let samples = dir.join("samples.csv");
    let mmd = ok(&["eval", "--config", config, "--metric", "mmd", "--samples", p(&samples), "--against", p(&data), "--out", p(dir)]);
    let nll = ok(&["eval", "--config", config, "--metric", "nll", "--proposals", "5000", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(dir)]);
    let heat = ok(&["eval", "--config", config, "--metric", "heatmap", "--resolution", "32", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(dir)]);
    assert!(dir.join("heatmap.pgm").exists());
    [mmd, nll, heat].iter().map(|o| String::from_utf8_lossy(&o.stdout).into_owned()).collect()
}

#[test]
fn pipeline_reruns_reproduce_every_metric() {
    let root = tempfile::tempdir().unwrap();
    let config = write_small_config(root.path());
    let a = pipeline(&root.path().join("a"), &config);
    let b = pipeline(&root.path().join("b"), &config);
    assert_eq!(a, b);
    assert!(a.contains("mmd = ") && a.contains("nll = ") && a.contains("support_contrast = "), "{a}");
}

#[test]
fn manifest_and_config_are_enough_to_rerun() {
    let root = tempfile::tempdir().unwrap();
    let first = root.path().join("first");
    ok(&["gen-data", "--ring", "--n", "200", "--seed", "9", "--out", p(&first)]);
    // Re-run from the echoed configuration alone.
    let second = root.path().join("second");
    let echoed = first.join("config.toml");
    ok(&["gen-data", "--config", p(&echoed), "--out", p(&second)]);
    assert_eq!(fs::read(first.join("data.csv")).unwrap(), fs::read(second.join("data.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config_file"], "config.toml");
    assert_eq!(manifest["argv"][1], "gen-data");
    // Replaying argv (with a new output directory) gives the same file.
    let third = root.path().join("third");
    let mut argv: Vec<String> = manifest["argv"].as_array().unwrap()[1..].iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let out_pos = argv.iter().position(|a| a == "--out").unwrap();
    argv[out_pos + 1] = p(&third).to_string();
    ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(first.join("data.csv")).unwrap(), fs::read(third.join("data.csv")).unwrap());
}

#[test]
fn errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let usage = ebm(&["kernel", "--structure", "hexagonal", "--S", "4", "--t", "1", "--out", p(dir.path())]);
    assert_eq!(usage.status.code(), Some(2));
    let line: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&usage.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(line["error"], "usage");

    let bad = ebm(&["kernel", "--structure", "uniform", "--S", "1", "--t", "1", "--out", p(dir.path())]);
    assert_eq!(bad.status.code(), Some(1));
    let line: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&bad.stderr).lines().last().unwrap()).unwrap();
    assert!(line["error"].is_string() && line["message"].is_string());

    let missing = ebm(&["eval", "--metric", "mmd", "--out", p(dir.path())]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn presets_are_valid_configs() {
    for name in ebm_heat::cli::PRESETS {
        let cfg = RunConfig::preset(name).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
