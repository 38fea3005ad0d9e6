//! Experiment configuration and the end-to-end pipeline: data, inference
//! chain, posterior prediction, metrics, cost report, artifact files.
//!
//! Determinism contract: every random stream is derived from the experiment
//! seed and a fixed purpose label, so reruns are byte-identical and the four
//! modes differ only through the providers of their quantum stages. Forcing
//! those providers back to classical reproduces the fully classical run
//! bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bnn::{
    forward_backward_norms, Dataset, InitRank, IpeProvider, Likelihood, MlpArchitecture, ModelSpec,
    OutputKind, PriorSpec,
};
use crate::cost::{compute_r, runtime_report, CostDims, CostReport, CostTerms, EpsilonSummary};
use crate::error::{Error, Result};
use crate::harness::data::{
    gen_binclass, gen_linreg, load_csv_dataset, split_dataset, standardize_split,
};
use crate::harness::predict::{
    log_likelihood_metric, predictive_draws, predictive_log_likelihood, summarize, PointPrediction,
};
use crate::harness::scan::linspace;
use crate::ipe::IpeParams;
use crate::rng::{mix, substream};
use crate::sampler::{run_chain, Algorithm, SamplerConfig};

// Stream purpose labels. Changing any of these changes every seeded result.
const SALT_DATA: u64 = 0x11;
const SALT_SPLIT: u64 = 0x22;
const SALT_CHAIN: u64 = 0x33;
const SALT_PROVIDER_INFERENCE: u64 = 0x44;
const SALT_PROVIDER_PREDICTION: u64 = 0x55;

/// Which stages run against the oracle: Classical/Quantum Inference crossed
/// with Classical/Quantum Prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cicp,
    Ciqp,
    Qicp,
    Qiqp,
}

impl Mode {
    pub fn quantum_inference(&self) -> bool {
        matches!(self, Mode::Qicp | Mode::Qiqp)
    }

    pub fn quantum_prediction(&self) -> bool {
        matches!(self, Mode::Ciqp | Mode::Qiqp)
    }

    pub fn has_quantum_stage(&self) -> bool {
        self.quantum_inference() || self.quantum_prediction()
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cicp" => Ok(Mode::Cicp),
            "ciqp" => Ok(Mode::Ciqp),
            "qicp" => Ok(Mode::Qicp),
            "qiqp" => Ok(Mode::Qiqp),
            other => Err(Error::Config(format!(
                "mode must be one of cicp|ciqp|qicp|qiqp, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Linreg,
    Binclass,
    CsvRegression,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linreg" => Ok(TaskKind::Linreg),
            "binclass" => Ok(TaskKind::Binclass),
            "csv-regression" | "csv" => Ok(TaskKind::CsvRegression),
            other => Err(Error::Config(format!(
                "task must be one of linreg|binclass|csv-regression, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    pub sigma_p: f64,
    pub sigma_y: f64,
    /// `None` draws full-rank initial positions.
    pub init_rank: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![5, 5],
            sigma_p: 1.0,
            sigma_y: 0.1,
            init_rank: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Nuts,
    Hmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub draws: usize,
    pub warmup: usize,
    pub algorithm: SamplerKind,
    /// HMC only.
    pub step_size: f64,
    /// HMC only.
    pub leapfrog_steps: usize,
    /// NUTS only.
    pub max_tree_depth: usize,
    /// NUTS only.
    pub target_accept: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            draws: 200,
            warmup: 200,
            algorithm: SamplerKind::Nuts,
            step_size: 0.05,
            leapfrog_steps: 20,
            max_tree_depth: 10,
            target_accept: 0.8,
        }
    }
}

impl SamplerSettings {
    fn algorithm(&self) -> Algorithm {
        match self.algorithm {
            SamplerKind::Nuts => Algorithm::Nuts {
                max_tree_depth: self.max_tree_depth,
                target_accept: self.target_accept,
            },
            SamplerKind::Hmc => Algorithm::Hmc {
                step_size: self.step_size,
                leapfrog_steps: self.leapfrog_steps,
            },
        }
    }
}

/// Synthetic-generator knobs; ignored for CSV tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Total generated points for linreg (train + held-out).
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub noise_std: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Evaluation grid size for the predictive-grid artifact (linreg).
    pub grid_points: usize,
    /// Generated points per class for binclass.
    pub class_points: usize,
    pub center_a: [f64; 2],
    pub center_b: [f64; 2],
    pub spread: f64,
    /// Side length of the 2-D predictive lattice (binclass).
    pub grid_side: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            points: 40,
            slope: 1.0,
            intercept: 0.0,
            noise_std: 0.1,
            x_min: -1.0,
            x_max: 1.0,
            grid_points: 101,
            class_points: 20,
            center_a: [-1.0, -1.0],
            center_b: [1.0, 1.0],
            spread: 0.4,
            grid_side: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub count: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            count: 1,
        }
    }
}

/// One experiment cell: task, mode, oracle width, model, sampler, splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub mode: Mode,
    #[serde(default)]
    pub qubits: Option<u32>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default = "default_standardize")]
    pub standardize: bool,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_repetitions() -> u32 {
    1
}

fn default_standardize() -> bool {
    true
}

impl ExperimentConfig {
    /// Smoke-test defaults for a task/mode pair; callers override fields.
    pub fn new(task: TaskKind, mode: Mode) -> Self {
        Self {
            task,
            mode,
            qubits: None,
            repetitions: 1,
            csv_path: None,
            standardize: true,
            model: ModelConfig::default(),
            sampler: SamplerSettings::default(),
            data: DataConfig::default(),
            split: SplitConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.has_quantum_stage() {
            match self.qubits {
                None => {
                    return Err(Error::Config(format!(
                        "mode {:?} has a quantum stage: qubits is required",
                        self.mode
                    )))
                }
                Some(q) => {
                    IpeParams::new(q, self.repetitions)?;
                }
            }
        }
        if self.task == TaskKind::CsvRegression && self.csv_path.is_none() {
            return Err(Error::Config(
                "task csv-regression requires csv_path".into(),
            ));
        }
        if self.split.count == 0 {
            return Err(Error::Config("split count must be at least 1".into()));
        }
        if self.sampler.draws == 0 {
            return Err(Error::Config(
                "sampler draws must be at least 1 for an experiment".into(),
            ));
        }
        if self.model.hidden_sizes.contains(&0) {
            return Err(Error::Config(
                "hidden_sizes entries must be positive".into(),
            ));
        }
        self.sampler_config(0).validate()?;
        Ok(())
    }

    fn sampler_config(&self, split: u32) -> SamplerConfig {
        SamplerConfig {
            draws: self.sampler.draws,
            warmup: self.sampler.warmup,
            algorithm: self.sampler.algorithm(),
            seed: mix(mix(self.seed, SALT_CHAIN), split as u64),
        }
    }

    fn model_spec(&self, input_dim: usize) -> Result<ModelSpec> {
        let (output, likelihood) = match self.task {
            TaskKind::Binclass => (OutputKind::BinaryClassification, Likelihood::Bernoulli),
            _ => (
                OutputKind::Regression,
                Likelihood::Gaussian {
                    sigma_y: self.model.sigma_y,
                },
            ),
        };
        let arch = MlpArchitecture::with_hidden(input_dim, &self.model.hidden_sizes, output)?;
        let init_rank = match self.model.init_rank {
            None => InitRank::Full,
            Some(r) => InitRank::LowRank(r),
        };
        ModelSpec::new(
            arch,
            PriorSpec {
                sigma_p: self.model.sigma_p,
                init_rank,
            },
            likelihood,
        )
    }

    fn provider(&self, salt: u64, split: u32, quantum: bool) -> Result<IpeProvider> {
        if !quantum {
            return Ok(IpeProvider::classical());
        }
        let qubits = self.qubits.expect("validated");
        let params = IpeParams::new(qubits, self.repetitions)?;
        Ok(IpeProvider::quantum(
            params,
            substream(mix(mix(self.seed, salt), split as u64), 0),
        ))
    }
}

/// Load a config file (a single JSON document mirroring [`ExperimentConfig`];
/// unknown keys are rejected).
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))
}

/// Aggregate quality metrics of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_loglik: f64,
    pub stderr_loglik: f64,
    /// RMSE of this run's predictive mean against the fully classical
    /// reference run under the same seed (0 for a classical run).
    pub rmse_vs_reference: f64,
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub metrics: Metrics,
    pub cost_report: CostReport,
    /// Split-0 predictive grid: inputs with mean and std per point.
    pub grid: Vec<(Vec<f64>, PointPrediction)>,
    pub files: Vec<PathBuf>,
}

/// Run the experiment described by `cfg`, writing artifacts into
/// `cfg.out_dir` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg, false)
}

/// Same pipeline with every quantum stage forced onto the classical provider.
/// Exists to verify mode factorization: the outputs must be byte-identical to
/// the CICP run with the same seed.
pub fn run_experiment_ablated(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg, true)
}

struct EpsilonAccumulator {
    by_qubits: BTreeMap<u32, (f64, f64, u64)>,
}

impl EpsilonAccumulator {
    fn new() -> Self {
        Self {
            by_qubits: BTreeMap::new(),
        }
    }

    fn absorb(&mut self, provider: &IpeProvider) {
        if let (Some(qubits), Some(stats)) = (provider.qubits(), provider.stats()) {
            if stats.invocations > 0 {
                let entry = self.by_qubits.entry(qubits).or_insert((0.0, 0.0, 0));
                entry.0 += stats.abs_error_sum;
                entry.1 = entry.1.max(stats.abs_error_max);
                entry.2 += stats.invocations;
            }
        }
    }

    fn summaries(&self) -> BTreeMap<u32, EpsilonSummary> {
        self.by_qubits
            .iter()
            .map(|(&q, &(sum, max, count))| {
                (
                    q,
                    EpsilonSummary {
                        mean: sum / count as f64,
                        max,
                        count,
                    },
                )
            })
            .collect()
    }

    /// Scalar ε for the runtime expressions: mean error at the configured
    /// width, or 1 when no oracle ran.
    fn scalar(&self) -> f64 {
        let total: u64 = self.by_qubits.values().map(|v| v.2).sum();
        if total == 0 {
            return 1.0;
        }
        let sum: f64 = self.by_qubits.values().map(|v| v.0).sum();
        sum / total as f64
    }
}

fn build_full_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut rng = substream(mix(cfg.seed, SALT_DATA), 0);
    match cfg.task {
        TaskKind::Linreg => Ok(gen_linreg(
            cfg.data.points,
            cfg.data.slope,
            cfg.data.intercept,
            cfg.data.noise_std,
            (cfg.data.x_min, cfg.data.x_max),
            &mut rng,
        )),
        TaskKind::Binclass => gen_binclass(
            cfg.data.class_points,
            (cfg.data.center_a, cfg.data.center_b),
            cfg.data.spread,
            &mut rng,
        ),
        TaskKind::CsvRegression => {
            let loaded =
                load_csv_dataset(cfg.csv_path.as_ref().expect("validated"), cfg.standardize)?;
            Ok(loaded.data)
        }
    }
}

/// Figure-domain inputs for synthetic tasks; CSV tasks use each split's test
/// inputs instead.
fn synthetic_grid(cfg: &ExperimentConfig) -> Option<Vec<Vec<f64>>> {
    match cfg.task {
        TaskKind::Linreg => Some(
            linspace(cfg.data.x_min, cfg.data.x_max, cfg.data.grid_points)
                .into_iter()
                .map(|x| vec![x])
                .collect(),
        ),
        TaskKind::Binclass => {
            let margin = 2.5 * cfg.data.spread;
            let lo = [
                cfg.data.center_a[0].min(cfg.data.center_b[0]) - margin,
                cfg.data.center_a[1].min(cfg.data.center_b[1]) - margin,
            ];
            let hi = [
                cfg.data.center_a[0].max(cfg.data.center_b[0]) + margin,
                cfg.data.center_a[1].max(cfg.data.center_b[1]) + margin,
            ];
            let side = cfg.data.grid_side;
            let xs = linspace(lo[0], hi[0], side);
            let ys = linspace(lo[1], hi[1], side);
            Some(
                ys.iter()
                    .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
                    .collect(),
            )
        }
        TaskKind::CsvRegression => None,
    }
}

/// Re-evaluate every kept sample on the training data classically to record
/// the norms the cost model consumes.
fn collect_run_telemetry(
    spec: &ModelSpec,
    samples: &[Vec<f64>],
    train: &Dataset,
) -> Result<crate::cost::RunTelemetry> {
    let arch = &spec.arch;
    let mut telemetry = crate::cost::RunTelemetry {
        layer_sizes: arch.layer_sizes().to_vec(),
        ..Default::default()
    };
    for theta in samples {
        let mut act_rows = Vec::with_capacity(train.len());
        let mut delta_rows = Vec::with_capacity(train.len());
        for (x, &y) in train.inputs.iter().zip(&train.targets) {
            let norms = forward_backward_norms(spec, theta, x, y)?;
            act_rows.push(norms.activation_norms);
            delta_rows.push(norms.delta_norms);
        }
        telemetry.activation_norms.push(act_rows);
        telemetry.delta_norms.push(delta_rows);
        let mut row_norms = Vec::with_capacity(arch.blocks());
        let mut col_norms = Vec::with_capacity(arch.blocks());
        for t in 0..arch.blocks() {
            let (fan_in, fan_out) = arch.block_dims(t);
            row_norms.push(
                (0..fan_out)
                    .map(|j| {
                        theta[arch.row_range(t, j)]
                            .iter()
                            .map(|w| w * w)
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect::<Vec<f64>>(),
            );
            col_norms.push(
                (0..fan_in)
                    .map(|i| {
                        (0..fan_out)
                            .map(|j| {
                                let w = theta[arch.row_range(t, j)][i];
                                w * w
                            })
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect::<Vec<f64>>(),
            );
        }
        telemetry.row_norms.push(row_norms);
        telemetry.col_norms.push(col_norms);
    }
    Ok(telemetry)
}

fn run(cfg: &ExperimentConfig, ablate: bool) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let full = build_full_dataset(cfg)?;
    let spec = cfg.model_spec(full.input_dim())?;
    let shared_grid = synthetic_grid(cfg);

    let quantum_inference = cfg.mode.quantum_inference() && !ablate;
    let quantum_prediction = cfg.mode.quantum_prediction() && !ablate;

    let mut per_split_loglik = Vec::with_capacity(cfg.split.count as usize);
    let mut epsilon = EpsilonAccumulator::new();
    let mut sq_err_sum = 0.0;
    let mut sq_err_count = 0u64;
    let mut re_sum = 0.0;
    let mut re_passes = 0u64;
    let mut split0_terms: Option<CostTerms> = None;
    let mut split0_dims: Option<CostDims> = None;
    let mut split0_grid: Vec<(Vec<f64>, PointPrediction)> = Vec::new();

    for s in 0..cfg.split.count {
        let (mut train, mut test) = split_dataset(
            &full,
            cfg.split.train_fraction,
            s,
            mix(cfg.seed, SALT_SPLIT),
        )?;
        if cfg.task == TaskKind::CsvRegression && cfg.standardize {
            standardize_split(&mut train, &mut test);
        }
        let sampler_cfg = cfg.sampler_config(s);

        let mut inference_provider = cfg.provider(SALT_PROVIDER_INFERENCE, s, quantum_inference)?;
        let chain = run_chain(&spec, &train, &mut inference_provider, &sampler_cfg)?;
        epsilon.absorb(&inference_provider);

        if s == 0 {
            let telemetry = collect_run_telemetry(&spec, &chain.samples, &train)?;
            split0_terms = Some(compute_r(&telemetry)?);
            split0_dims = Some(CostDims {
                samples_k: chain.samples.len(),
                train_n: train.len(),
                test_m: test.len(),
                neuron_count: spec.arch.neuron_count(),
                weight_count: spec.arch.weight_count(),
            });
        }

        let mut prediction_provider =
            cfg.provider(SALT_PROVIDER_PREDICTION, s, quantum_prediction)?;
        let test_draws = predictive_draws(
            &spec,
            &chain.samples,
            &test.inputs,
            &mut prediction_provider,
        )?;
        per_split_loglik.push(predictive_log_likelihood(
            &spec,
            &test_draws.values,
            &test.targets,
        )?);
        re_sum += test_draws.re_mean * test_draws.forward_passes as f64;
        re_passes += test_draws.forward_passes;

        // Figure-domain predictions: the synthetic grid, or the test inputs
        // for CSV tasks (whose draws we already have).
        let (grid_inputs, grid_preds) = match &shared_grid {
            Some(grid) => {
                let draws =
                    predictive_draws(&spec, &chain.samples, grid, &mut prediction_provider)?;
                (grid.clone(), summarize(&spec, &draws))
            }
            None => (test.inputs.clone(), summarize(&spec, &test_draws)),
        };
        epsilon.absorb(&prediction_provider);

        // Classical reference for the same seed and split. When nothing
        // quantum ran, this run is its own reference; with classical
        // inference the reference chain is stream-identical to the one we
        // already have, so only the prediction stage is redone.
        let reference_means: Vec<f64> = if quantum_inference || quantum_prediction {
            let mut classical = IpeProvider::classical();
            let ref_samples = if quantum_inference {
                run_chain(&spec, &train, &mut classical, &sampler_cfg)?.samples
            } else {
                chain.samples.clone()
            };
            let ref_preds = crate::harness::predict::posterior_predictive(
                &spec,
                &ref_samples,
                &grid_inputs,
                &mut classical,
            )?;
            ref_preds.into_iter().map(|p| p.mean).collect()
        } else {
            grid_preds.iter().map(|p| p.mean).collect()
        };
        for (pred, reference) in grid_preds.iter().zip(&reference_means) {
            sq_err_sum += (pred.mean - reference) * (pred.mean - reference);
            sq_err_count += 1;
        }

        if s == 0 {
            split0_grid = grid_inputs.into_iter().zip(grid_preds).collect();
        }
    }

    let (mean_loglik, stderr_loglik) = log_likelihood_metric(&per_split_loglik)?;
    let rmse = (sq_err_sum / sq_err_count as f64).sqrt();
    let metrics = Metrics {
        mean_loglik,
        stderr_loglik,
        rmse_vs_reference: rmse,
    };
    let cost_report = runtime_report(
        &split0_dims.expect("at least one split"),
        &split0_terms.expect("at least one split"),
        re_sum / re_passes as f64,
        epsilon.scalar(),
        epsilon.summaries(),
        quantum_inference,
    );

    let mut files = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        files.push(write_json(&dir.join("metrics.json"), &metrics)?);
        files.push(write_json(&dir.join("cost_report.json"), &cost_report)?);
        files.push(write_grid_csv(
            &dir.join("predictive_grid.csv"),
            &split0_grid,
        )?);
    }

    Ok(ExperimentOutput {
        metrics,
        cost_report,
        grid: split0_grid,
        files,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn write_grid_csv(path: &Path, grid: &[(Vec<f64>, PointPrediction)]) -> Result<PathBuf> {
    let dim = grid.first().map(|(x, _)| x.len()).unwrap_or(0);
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for c in 0..dim {
        write!(w, "x{},", c + 1)?;
    }
    writeln!(w, "mean,std")?;
    for (x, pred) in grid {
        for v in x {
            write!(w, "{v},")?;
        }
        writeln!(w, "{},{}", pred.mean, pred.std)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}
