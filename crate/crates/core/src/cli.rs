//! The `ebm-heat` command-line driver.
//!
//! ```text
//! ebm-heat [--seed N] [--out DIR] [--config FILE | --preset NAME] <command> [flags]
//! ```
//!
//! Settings are resolved in three layers: a named preset (or the built-in
//! defaults), then a TOML [`RunConfig`] file, then command-line flags. The
//! resolved configuration is written to `DIR/config.toml` and the command
//! line together with the list of outputs to `DIR/manifest.json`; re-running
//! with `--config DIR/config.toml` and the same command reproduces the run.
//!
//! Every random draw descends from `Streams::new(seed)`:
//! `data`, `init`, `train`, `sample`, `nll` and `contrast` substreams.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::{self, CodeSpec, DatasetSpec, ToyDistribution};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, MmdConfig, MmdEstimator};
use crate::kernels::{build_rate_matrix, euler_kernel, heat_kernel, Structure};
use crate::loss::EdLossConfig;
use crate::models::{read_checkpoint, write_checkpoint, AnyModel, Checkpoint, EnergyModel, MlpSpec, ModelSpec};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::perturb::PerturbationSpec;
use crate::rng::Streams;
use crate::samplers::{sample_chain, SamplerConfig};
use crate::schema::{Batch, Dimension, NumericScaler, StateSchema};
use crate::train::{train, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub steps: u64,
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Importance-sampling proposals for the NLL.
    pub proposals: usize,
    /// Heatmap side length in pixels.
    pub resolution: usize,
    /// Data pixels and random pixels used by the support-contrast statistic.
    pub contrast_points: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            proposals: 1_000_000,
            resolution: 256,
            contrast_points: 1000,
        }
    }
}

fn current_version() -> u32 {
    CONFIG_VERSION
}
fn default_n() -> usize {
    10_000
}
fn default_optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(1e-4)
}

/// Everything a run needs besides its input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "current_version")]
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Records generated by `gen-data`.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    /// Model architecture; inferred from the data schema when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Training objective; inferred from the data schema when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<EdLossConfig>,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub mmd: MmdConfig,
    #[serde(default)]
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            n: default_n(),
            dataset: None,
            model: None,
            loss: None,
            optimizer: default_optimizer(),
            train: TrainSettings::default(),
            sampler: SamplerConfig::default(),
            mmd: MmdConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 3] = ["2spirals", "ising", "ring"];

/// Std of the Gaussian noise on numeric columns in the `ring` preset, in
/// standardized units.
pub const RING_NUMERIC_STD: f64 = 0.1;

impl RunConfig {
    /// Ready-made settings for the bundled experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        Ok(match name {
            "2spirals" => Self {
                n: 20_000,
                dataset: Some(DatasetSpec::Toy {
                    dist: ToyDistribution::TwoSpirals,
                    code: CodeSpec::gray16(),
                }),
                model: Some(ModelSpec::Mlp(MlpSpec::density())),
                loss: Some(EdLossConfig::new(PerturbationSpec::grid_resample())),
                optimizer: OptimizerConfig::adam(1e-4),
                train: TrainSettings {
                    steps: 5000,
                    batch_size: 128,
                },
                ..base
            },
            "ising" => Self {
                n: 2000,
                dataset: Some(DatasetSpec::Ising {
                    side: 6,
                    sigma: 0.2,
                    gibbs_steps: datasets::ising::DEFAULT_GIBBS_STEPS,
                }),
                model: Some(ModelSpec::Ising),
                loss: Some(EdLossConfig {
                    l1: 0.01,
                    ..EdLossConfig::new(PerturbationSpec::bernoulli(0.1)?)
                }),
                optimizer: OptimizerConfig::adam(1e-3),
                train: TrainSettings {
                    steps: 2000,
                    batch_size: 256,
                },
                ..base
            },
            "ring" => Self {
                n: 10_000,
                dataset: Some(DatasetSpec::Ring),
                model: Some(ModelSpec::Mlp(MlpSpec::tabular())),
                loss: Some(EdLossConfig::new(PerturbationSpec::tabular_grid(RING_NUMERIC_STD))),
                optimizer: OptimizerConfig::adam(1e-3),
                train: TrainSettings {
                    steps: 2000,
                    batch_size: 128,
                },
                sampler: SamplerConfig {
                    rounds: 100,
                    step_size: 1e-3,
                    ..SamplerConfig::default()
                },
                ..base
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if let Some(loss) = &self.loss {
            loss.validate()?;
        }
        self.optimizer.validate()?;
        if self.train.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.mmd.bandwidth > 0.0) {
            return Err(Error::InvalidConfig("MMD bandwidth must be positive".into()));
        }
        Ok(())
    }

    /// The configured model, or a default for the schema: an Ising model on
    /// spins, the density MLP on other all-categorical data, and the tabular
    /// MLP on mixed data.
    pub fn model_for(&self, schema: &StateSchema) -> ModelSpec {
        if let Some(m) = &self.model {
            return m.clone();
        }
        let all_spins = schema.dims.iter().all(|d| matches!(d, Dimension::Spin { .. }));
        if all_spins {
            ModelSpec::Ising
        } else if schema.numeric_dims() == 0 {
            ModelSpec::Mlp(MlpSpec::density())
        } else {
            ModelSpec::Mlp(MlpSpec::tabular())
        }
    }

    /// The configured loss, or a default for the schema: coordinate
    /// resampling, plus Gaussian noise on numeric columns.
    pub fn loss_for(&self, schema: &StateSchema) -> EdLossConfig {
        if let Some(l) = &self.loss {
            return l.clone();
        }
        if schema.numeric_dims() == 0 {
            EdLossConfig::new(PerturbationSpec::grid_resample())
        } else {
            EdLossConfig::new(PerturbationSpec::tabular_grid(RING_NUMERIC_STD))
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ebm-heat", version, about = "Energy discrepancy training on discrete and mixed data")]
pub struct Cli {
    /// Root seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named preset used when no configuration file is given.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset file.
    GenData(GenDataArgs),
    /// Write a transition kernel as CSV.
    Kernel(KernelArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Draw samples from a checkpoint.
    Sample(SampleArgs),
    /// Compute a metric.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Toy distribution name (2spirals, 8gaussians, circles, moons, pinwheel, swissroll, checkerboard).
    #[arg(long, conflicts_with_all = ["ising", "ring"])]
    pub toy: Option<ToyDistribution>,
    /// Digit code for toy data (gray16, base5, base10, grayN, baseBxN).
    #[arg(long, requires = "toy")]
    pub code: Option<CodeSpec>,
    /// Side length of an Ising lattice.
    #[arg(long, conflicts_with = "ring")]
    pub ising: Option<usize>,
    #[arg(long, requires = "ising")]
    pub sigma: Option<f64>,
    #[arg(long, requires = "ising")]
    pub gibbs_steps: Option<usize>,
    /// The mixed ring dataset.
    #[arg(long)]
    pub ring: bool,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Exact,
    Euler,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// uniform, cyclic, ordinal, binary or masking:M (1-based absorbing state).
    #[arg(long)]
    pub structure: Structure,
    /// Number of states.
    #[arg(long = "S", alias = "states")]
    pub states: usize,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub form: FormArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data file; generated from the configured dataset when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l1: Option<f64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Exponential-Hamming MMD between `--samples` and `--against`.
    Mmd,
    /// Importance-sampled NLL of `--data` under `--checkpoint`.
    Nll,
    /// NLL with the partition function computed by enumeration.
    ExactNll,
    /// RMSE and negative log-RMSE of couplings against `--truth`.
    Rmse,
    /// Density raster of `--checkpoint`; with `--data` also the support contrast.
    Heatmap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Biased,
    Unbiased,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub against: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Coupling matrix CSV to score instead of a checkpoint.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// True coupling matrix CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub proposals: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Code used to place the heatmap; taken from the configured dataset by default.
    #[arg(long)]
    pub code: Option<CodeSpec>,
}

/// What a command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub reports: Vec<EvalReport>,
}

fn missing(flag: &str) -> Error {
    Error::InvalidConfig(format!("--{flag} is required"))
}

/// Resolve the layered configuration for `cli`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::GenData(a) => {
            if let Some(dist) = a.toy {
                cfg.dataset = Some(DatasetSpec::Toy {
                    dist,
                    code: a.code.unwrap_or_else(CodeSpec::gray16),
                });
            } else if let Some(side) = a.ising {
                cfg.dataset = Some(DatasetSpec::Ising {
                    side,
                    sigma: a.sigma.unwrap_or(0.2),
                    gibbs_steps: a.gibbs_steps.unwrap_or(datasets::ising::DEFAULT_GIBBS_STEPS),
                });
            } else if a.ring {
                cfg.dataset = Some(DatasetSpec::Ring);
            }
            if let Some(n) = a.n {
                cfg.n = n;
            }
        }
        Command::Train(a) => {
            if let Some(s) = a.steps {
                cfg.train.steps = s;
            }
            if let Some(b) = a.batch_size {
                cfg.train.batch_size = b;
            }
            if let Some(lr) = a.lr {
                cfg.optimizer.lr = lr;
            }
            if let Some(l1) = a.l1 {
                let loss = cfg.loss.get_or_insert_with(|| EdLossConfig::new(PerturbationSpec::grid_resample()));
                loss.l1 = l1;
            }
        }
        Command::Sample(a) => {
            if let Some(r) = a.rounds {
                cfg.sampler.rounds = r;
            }
            if let Some(s) = a.step_size {
                cfg.sampler.step_size = s;
            }
        }
        Command::Eval(a) => {
            if let Some(e) = a.estimator {
                cfg.mmd.estimator = match e {
                    EstimatorArg::Biased => MmdEstimator::Biased,
                    EstimatorArg::Unbiased => MmdEstimator::Unbiased,
                };
            }
            if let Some(b) = a.bandwidth {
                cfg.mmd.bandwidth = b;
            }
            if let Some(p) = a.proposals {
                cfg.eval.proposals = p;
            }
            if let Some(r) = a.resolution {
                cfg.eval.resolution = r;
            }
        }
        Command::Kernel(_) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Dataset generation; returns the files written into `out`.
pub fn cmd_gen_data(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let spec = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no dataset given (use --toy, --ising or --ring)".into()))?;
    let generated = datasets::generate(spec, cfg.n, Streams::new(cfg.seed).child("data"))?;
    datasets::write_dataset(&out.join("data.csv"), &generated.schema, &generated.batch)?;
    let mut files = vec!["data.csv".to_string()];
    if let Some(j) = &generated.couplings {
        datasets::write_matrix(&out.join("couplings.csv"), j)?;
        files.push("couplings.csv".into());
    }
    Ok(files)
}

pub fn cmd_kernel(args: &KernelArgs, out: &Path) -> Result<Vec<String>> {
    let kernel = match args.form {
        FormArg::Exact => heat_kernel(args.structure, args.states, args.t)?,
        FormArg::Euler => euler_kernel(&build_rate_matrix(args.structure, args.states)?, args.t)?,
    };
    kernel.write_csv(std::io::BufWriter::new(fs::File::create(out.join("kernel.csv"))?))?;
    Ok(vec!["kernel.csv".into()])
}

/// Standardizer of the numeric block, or `None` for purely discrete data.
pub fn scaler_for(batch: &Batch) -> Result<Option<NumericScaler>> {
    if batch.numeric_dims() == 0 {
        return Ok(None);
    }
    NumericScaler::fit(batch).map(Some)
}

/// Train from scratch (or from `resume`) on `data`. Numeric columns are
/// standardized first; a resumed run keeps the checkpoint's scaler.
pub fn cmd_train(cfg: &RunConfig, data: &Path, resume: Option<&Path>, out: &Path) -> Result<Vec<String>> {
    let (schema, raw) = datasets::read_dataset(data)?;
    let root = Streams::new(cfg.seed);
    let (mut model, mut optimizer, start, scaler) = match resume {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if ckpt.model.schema() != &schema {
                return Err(Error::SchemaMismatch("checkpoint and data schemas differ".into()));
            }
            let n = ckpt.model.num_params();
            let opt = ckpt.optimizer.unwrap_or_else(|| Optimizer::new(cfg.optimizer.clone(), n));
            let scaler = match ckpt.scaler {
                Some(s) => Some(s),
                None => scaler_for(&raw)?,
            };
            (ckpt.model, opt, ckpt.step, scaler)
        }
        None => {
            let model = AnyModel::new(&cfg.model_for(&schema), &schema, &mut root.child("init").rng())?;
            let opt = Optimizer::new(cfg.optimizer.clone(), model.num_params());
            (model, opt, 0, scaler_for(&raw)?)
        }
    };
    let batch = match &scaler {
        Some(s) => s.transform(&raw)?,
        None => raw,
    };
    let train_cfg = TrainConfig {
        steps: cfg.train.steps,
        batch_size: cfg.train.batch_size,
        loss: cfg.loss_for(&schema),
    };
    let report = train(&mut model, &batch, &train_cfg, &mut optimizer, start, root.child("train"), &mut |r, _| {
        if r.step % 100 == 0 {
            log::info!("step {} loss {:.6} |grad| {:.4e}", r.step, r.loss, r.grad_norm);
        }
    })?;
    let ckpt = Checkpoint {
        model,
        step: start + cfg.train.steps,
        optimizer: Some(optimizer),
        scaler,
    };
    write_checkpoint(&out.join("checkpoint.txt"), &ckpt)?;
    report.write_csv(fs::File::create(out.join("train_log.csv"))?)?;
    Ok(vec!["checkpoint.txt".into(), "train_log.csv".into()])
}

pub fn cmd_sample(cfg: &RunConfig, checkpoint: &Path, n: usize, out: &Path) -> Result<Vec<String>> {
    let ckpt = read_checkpoint(checkpoint)?;
    let mut samples = sample_chain(&ckpt.model, &cfg.sampler, n, Streams::new(cfg.seed).child("sample"))?;
    if let Some(s) = &ckpt.scaler {
        samples = s.inverse(&samples)?;
    }
    datasets::write_dataset(&out.join("samples.csv"), ckpt.model.schema(), &samples)?;
    Ok(vec!["samples.csv".into()])
}

fn couplings_of(model: &AnyModel) -> Result<Array2<f64>> {
    match model {
        AnyModel::Ising(m) => Ok(m.couplings().to_owned()),
        _ => Err(Error::Unsupported("coupling recovery needs an Ising checkpoint".into())),
    }
}

pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs, out: &Path) -> Result<(Vec<String>, Vec<EvalReport>)> {
    let root = Streams::new(cfg.seed);
    let mut files = Vec::new();
    let reports = match args.metric {
        Metric::Mmd => {
            let (sx, x) = datasets::read_dataset(args.samples.as_deref().ok_or_else(|| missing("samples"))?)?;
            let (sy, y) = datasets::read_dataset(args.against.as_deref().ok_or_else(|| missing("against"))?)?;
            if sx != sy {
                return Err(Error::SchemaMismatch("the two files have different schemas".into()));
            }
            let value = eval::mmd_hamming(&x, &y, &cfg.mmd)?;
            vec![EvalReport::new("mmd", value, None, serde_json::to_value(cfg.mmd)?)?]
        }
        Metric::Nll | Metric::ExactNll => {
            let ckpt = read_checkpoint(args.checkpoint.as_deref().ok_or_else(|| missing("checkpoint"))?)?;
            let (schema, test) = datasets::read_dataset(args.data.as_deref().ok_or_else(|| missing("data"))?)?;
            if &schema != ckpt.model.schema() {
                return Err(Error::SchemaMismatch("checkpoint and data schemas differ".into()));
            }
            if args.metric == Metric::Nll {
                let est = eval::nll_importance(&ckpt.model, &test, cfg.eval.proposals, root.child("nll"))?;
                let config = serde_json::json!({
                    "proposals": cfg.eval.proposals,
                    "log_partition": est.log_partition,
                    "max_weight_fraction": est.max_weight_fraction,
                });
                vec![EvalReport::new("nll", est.nll, Some(est.std_error), config)?]
            } else {
                vec![EvalReport::new("exact_nll", eval::exact_nll(&ckpt.model, &test)?, None, serde_json::Value::Null)?]
            }
        }
        Metric::Rmse => {
            let truth = datasets::read_matrix(args.truth.as_deref().ok_or_else(|| missing("truth"))?)?;
            let estimate = match (&args.estimate, &args.checkpoint) {
                (Some(p), _) => datasets::read_matrix(p)?,
                (None, Some(c)) => couplings_of(&read_checkpoint(c)?.model)?,
                (None, None) => return Err(missing("checkpoint")),
            };
            let zero = Array2::zeros(truth.dim());
            let config = serde_json::json!({ "rmse_of_zero": eval::rmse(&zero, &truth)? });
            vec![
                EvalReport::new("rmse", eval::rmse(&estimate, &truth)?, None, config)?,
                EvalReport::new("neg_log_rmse", eval::neg_log_rmse(&estimate, &truth)?, None, serde_json::Value::Null)?,
            ]
        }
        Metric::Heatmap => {
            let ckpt = read_checkpoint(args.checkpoint.as_deref().ok_or_else(|| missing("checkpoint"))?)?;
            let code = match (args.code, &cfg.dataset) {
                (Some(c), _) => c,
                (None, Some(DatasetSpec::Toy { code, .. })) => *code,
                _ => return Err(missing("code")),
            };
            let map = eval::export_energy_heatmap(&ckpt.model, &code, cfg.eval.resolution, &out.join("heatmap"))?;
            files.extend(["heatmap.pgm".to_string(), "heatmap.csv".to_string()]);
            let mut reports = Vec::new();
            if let Some(data) = &args.data {
                let (_, batch) = datasets::read_dataset(data)?;
                let points = code.decode_batch(&batch)?;
                let n = cfg.eval.contrast_points;
                let value = eval::support_contrast(&map, &points, n, &mut root.child("contrast").rng())?;
                let config = serde_json::json!({ "resolution": cfg.eval.resolution, "points": n, "code": code.to_string() });
                reports.push(EvalReport::new("support_contrast", value, None, config)?);
            }
            reports
        }
    };
    eval::write_reports_csv(fs::File::create(out.join("eval.csv"))?, &reports)?;
    let text: String = reports.iter().map(|r| r.summary() + "\n").collect();
    fs::write(out.join("eval.txt"), text)?;
    files.extend(["eval.csv".to_string(), "eval.txt".to_string()]);
    Ok((files, reports))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::GenData(_) => "gen-data",
        Command::Kernel(_) => "kernel",
        Command::Train(_) => "train",
        Command::Sample(_) => "sample",
        Command::Eval(_) => "eval",
    }
}

/// Run a parsed command line. `argv` is recorded in the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let mut outcome = Outcome::default();
    match &cli.command {
        Command::GenData(_) => outcome.files = cmd_gen_data(&cfg, &out)?,
        Command::Kernel(a) => outcome.files = cmd_kernel(a, &out)?,
        Command::Train(a) => {
            let generated;
            let data = match &a.data {
                Some(p) => p.clone(),
                None => {
                    generated = cmd_gen_data(&cfg, &out)?;
                    outcome.files.extend(generated);
                    out.join("data.csv")
                }
            };
            outcome.files.extend(cmd_train(&cfg, &data, a.resume.as_deref(), &out)?);
        }
        Command::Sample(a) => outcome.files = cmd_sample(&cfg, &a.checkpoint, a.n, &out)?,
        Command::Eval(a) => {
            let (files, reports) = cmd_eval(&cfg, a, &out)?;
            outcome.files = files;
            outcome.reports = reports;
        }
    }
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    let manifest = serde_json::json!({
        "program": "ebm-heat",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "argv": argv,
        "seed": cfg.seed,
        "config_file": "config.toml",
        "outputs": outcome.files,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    outcome.files.extend(["config.toml".to_string(), "manifest.json".to_string()]);
    Ok(outcome)
}

/// Parse and run; the `Err` side carries the process exit code after the
/// error line has been printed to stderr.
pub fn main_with_args<I, T>(args: I) -> std::result::Result<Outcome, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(Outcome::default());
            }
            let line = serde_json::json!({ "error": "usage", "message": e.to_string().trim() });
            eprintln!("{line}");
            return Err(2);
        }
    };
    match run(&cli, &argv) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{}", r.summary());
            }
            Ok(outcome)
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            Err(1)
        }
    }
}
