//! `qbnn` command line: oracle noise scans, single experiments, experiment
//! grids, and standalone runtime cost reports.
//!
//! Data goes to the requested files only; all diagnostics go to stderr.
//! Exit codes: 0 success, 2 configuration error, 1 runtime failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use qbnn_core::cost::{runtime_report, CostDims, CostTerms};
use qbnn_core::harness::{
    ipe_noise_scan, linspace, load_config, run_experiment, write_noise_scan, ExperimentConfig,
    Mode, SamplerKind, TaskKind,
};
use qbnn_core::rng::substream;
use qbnn_core::Error;

#[derive(Parser)]
#[command(
    name = "qbnn",
    about = "Bayesian neural network inference against a simulated quantum inner-product oracle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the oracle's estimate of a sliding inner product and write the
    /// draws plus the exact per-point distributions.
    IpeScan(IpeScanArgs),
    /// Run one experiment (data, inference chain, prediction, metrics, cost
    /// report) into an output directory.
    Run(RunArgs),
    /// Expand modes x qubits x seeds into one experiment per cell.
    Grid(GridArgs),
    /// Evaluate the asymptotic runtime expressions for given dimensions and
    /// cost terms.
    CostReport(CostReportArgs),
}

#[derive(Args)]
struct IpeScanArgs {
    /// Phase-register width.
    #[arg(long)]
    qubits: u32,
    /// Median-of-m repetitions per estimate (odd).
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    x_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Draws per grid point.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the exact distributions land next to it with an `_exact`
    /// suffix.
    #[arg(long)]
    out: PathBuf,
}

/// Flag overrides shared by `run` and `grid`; every flag wins over the
/// config-file value of the same name.
#[derive(Args, Clone)]
struct ExperimentOverrides {
    /// JSON config file mirroring the experiment schema.
    #[arg(long)]
    config: Option<PathBuf>,
    /// linreg | binclass | csv-regression.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    csv_path: Option<PathBuf>,
    /// Disable per-split standardization of CSV columns.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Posterior samples to keep (K).
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// nuts | hmc.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    leapfrog_steps: Option<usize>,
    #[arg(long)]
    max_tree_depth: Option<usize>,
    #[arg(long)]
    target_accept: Option<f64>,
    /// Comma-separated hidden layer widths, e.g. 5,5.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    sigma_p: Option<f64>,
    #[arg(long)]
    sigma_y: Option<f64>,
    /// Rank of initial weight draws ("full" or an integer).
    #[arg(long)]
    init_rank: Option<String>,
    /// Number of train/test splits.
    #[arg(long)]
    splits: Option<u32>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Generated points for synthetic tasks.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: ExperimentOverrides,
    /// cicp | ciqp | qicp | qiqp.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    qubits: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics.json, cost_report.json,
    /// predictive_grid.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    overrides: ExperimentOverrides,
    /// Comma-separated modes, e.g. cicp,qiqp.
    #[arg(long)]
    modes: String,
    /// Comma-separated qubit counts for quantum stages, e.g. 5,10,13.
    #[arg(long, default_value = "")]
    qubits: String,
    /// Comma-separated seeds, e.g. 0,1,2,3,4.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Base output directory; one subdirectory per cell.
    #[arg(long)]
    out: PathBuf,
    /// Parallel cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CostReportArgs {
    #[arg(long)]
    samples_k: usize,
    #[arg(long)]
    train_n: usize,
    #[arg(long)]
    test_m: usize,
    /// Neuron count.
    #[arg(long)]
    omega: usize,
    /// Weight count.
    #[arg(long)]
    weights_p: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    r_a: f64,
    #[arg(long, default_value_t = 0.0)]
    r_delta: f64,
    #[arg(long, default_value_t = 0.0)]
    r_w: f64,
    #[arg(long, default_value_t = 1.0)]
    r_e: f64,
    /// The inference stage ran on the oracle (keeps the sqrt(KN) storage
    /// factor in the prediction expression).
    #[arg(long)]
    quantum_inference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn env_seed() -> Option<u64> {
    std::env::var("QBNN_SEED").ok().and_then(|s| s.parse().ok())
}

fn resolve_seed(flag: Option<u64>, config_seed: Option<u64>) -> u64 {
    flag.or(config_seed).or_else(env_seed).unwrap_or(0)
}

fn parse_list<T: FromStr>(csv: &str, what: &str) -> Result<Vec<T>, Error> {
    csv.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("{what}: cannot parse {s:?}")))
        })
        .collect()
}

fn build_experiment(
    overrides: &ExperimentOverrides,
    mode: Option<&str>,
    qubits: Option<u32>,
    seed_flag: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &overrides.config {
        Some(path) => load_config(path)?,
        None => {
            let task = overrides
                .task
                .as_deref()
                .ok_or_else(|| Error::Config("task is required without a config file".into()))?;
            let mode =
                mode.ok_or_else(|| Error::Config("mode is required without a config file".into()))?;
            ExperimentConfig::new(TaskKind::from_str(task)?, Mode::from_str(mode)?)
        }
    };
    if overrides.config.is_some() {
        if let Some(task) = &overrides.task {
            cfg.task = TaskKind::from_str(task)?;
        }
        if let Some(mode) = mode {
            cfg.mode = Mode::from_str(mode)?;
        }
    }
    cfg.seed = resolve_seed(seed_flag, overrides.config.as_ref().map(|_| cfg.seed));
    if let Some(q) = qubits {
        cfg.qubits = Some(q);
    }
    if let Some(path) = &overrides.csv_path {
        cfg.csv_path = Some(path.clone());
    }
    if overrides.no_standardize {
        cfg.standardize = false;
    }
    if let Some(m) = overrides.repetitions {
        cfg.repetitions = m;
    }
    if let Some(k) = overrides.draws {
        cfg.sampler.draws = k;
    }
    if let Some(w) = overrides.warmup {
        cfg.sampler.warmup = w;
    }
    if let Some(a) = &overrides.algorithm {
        cfg.sampler.algorithm = match a.to_ascii_lowercase().as_str() {
            "nuts" => SamplerKind::Nuts,
            "hmc" => SamplerKind::Hmc,
            other => {
                return Err(Error::Config(format!(
                    "algorithm must be nuts or hmc, got {other:?}"
                )))
            }
        };
    }
    if let Some(s) = overrides.step_size {
        cfg.sampler.step_size = s;
    }
    if let Some(l) = overrides.leapfrog_steps {
        cfg.sampler.leapfrog_steps = l;
    }
    if let Some(d) = overrides.max_tree_depth {
        cfg.sampler.max_tree_depth = d;
    }
    if let Some(t) = overrides.target_accept {
        cfg.sampler.target_accept = t;
    }
    if let Some(hidden) = &overrides.hidden {
        cfg.model.hidden_sizes = parse_list(hidden, "hidden")?;
    }
    if let Some(s) = overrides.sigma_p {
        cfg.model.sigma_p = s;
    }
    if let Some(s) = overrides.sigma_y {
        cfg.model.sigma_y = s;
    }
    if let Some(rank) = &overrides.init_rank {
        cfg.model.init_rank = if rank.eq_ignore_ascii_case("full") {
            None
        } else {
            Some(rank.parse().map_err(|_| {
                Error::Config(format!(
                    "init_rank must be \"full\" or an integer, got {rank:?}"
                ))
            })?)
        };
    }
    if let Some(c) = overrides.splits {
        cfg.split.count = c;
    }
    if let Some(f) = overrides.train_fraction {
        cfg.split.train_fraction = f;
    }
    if let Some(p) = overrides.points {
        cfg.data.points = p;
    }
    if let Some(n) = overrides.noise_std {
        cfg.data.noise_std = n;
    }
    if let Some(out) = out {
        cfg.out_dir = Some(out);
    }
    Ok(cfg)
}

fn cmd_ipe_scan(args: &IpeScanArgs) -> Result<(), Error> {
    if args.grid == 0 {
        return Err(Error::Config("grid must be at least 1".into()));
    }
    // Validates qubits and repetitions up front.
    qbnn_core::ipe::IpeParams::new(args.qubits, args.repetitions)?;
    let seed = resolve_seed(args.seed, None);
    let grid = linspace(args.x_min, args.x_max, args.grid);
    let mut rng = substream(seed, 0);
    let scan = ipe_noise_scan(args.qubits, &grid, args.draws, &mut rng)?;
    let exact_path = sidecar_path(&args.out);
    write_noise_scan(&scan, &args.out, &exact_path)?;
    eprintln!(
        "wrote {} draws to {} and exact distributions to {}",
        scan.rows.len(),
        args.out.display(),
        exact_path.display()
    );
    Ok(())
}

fn sidecar_path(out: &std::path::Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("scan");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_exact.{ext}"))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let cfg = build_experiment(
        &args.overrides,
        args.mode.as_deref(),
        args.qubits,
        args.seed,
        args.out.clone(),
    )?;
    if cfg.out_dir.is_none() {
        return Err(Error::Config("out directory is required".into()));
    }
    cfg.validate()?;
    let output = run_experiment(&cfg)?;
    for file in &output.files {
        eprintln!("wrote {}", file.display());
    }
    eprintln!(
        "mean_loglik {:.6}, rmse_vs_reference {:.6}",
        output.metrics.mean_loglik, output.metrics.rmse_vs_reference
    );
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> Result<(), Error> {
    let modes: Vec<Mode> = parse_list::<String>(&args.modes, "modes")?
        .iter()
        .map(|m| Mode::from_str(m))
        .collect::<Result<_, _>>()?;
    if modes.is_empty() {
        return Err(Error::Config("modes must not be empty".into()));
    }
    let qubit_list: Vec<u32> = parse_list(&args.qubits, "qubits")?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seeds")?;
    if seeds.is_empty() {
        return Err(Error::Config("seeds must not be empty".into()));
    }
    if args.jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }

    // One cell per (mode, qubits, seed); classical-only cells ignore the
    // qubit axis and appear once per seed.
    let mut cells: Vec<(String, ExperimentConfig)> = Vec::new();
    for &mode in &modes {
        let qubit_axis: Vec<Option<u32>> = if mode.has_quantum_stage() {
            if qubit_list.is_empty() {
                return Err(Error::Config(format!(
                    "mode {mode:?} has a quantum stage: qubits is required"
                )));
            }
            qubit_list.iter().map(|&q| Some(q)).collect()
        } else {
            vec![None]
        };
        for &qubits in &qubit_axis {
            for &seed in &seeds {
                let name = match qubits {
                    Some(q) => format!("{mode:?}_n{q}_seed{seed}").to_lowercase(),
                    None => format!("{mode:?}_seed{seed}").to_lowercase(),
                };
                let mut cfg = build_experiment(
                    &args.overrides,
                    Some(&format!("{mode:?}").to_lowercase()),
                    qubits,
                    Some(seed),
                    Some(args.out.join(&name)),
                )?;
                cfg.seed = seed;
                cfg.validate()?;
                cells.push((name, cfg));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("jobs: {e}")))?;
    let results: Vec<(String, Result<(), Error>)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|(name, cfg)| (name.clone(), run_experiment(cfg).map(|_| ())))
            .collect()
    });

    let mut failed = 0usize;
    for (name, result) in &results {
        match result {
            Ok(()) => eprintln!("cell {name}: ok"),
            Err(e) => {
                failed += 1;
                eprintln!("cell {name}: FAILED: {e}");
            }
        }
    }
    if failed > 0 {
        return Err(Error::ChainFailure(format!("{failed} grid cell(s) failed")));
    }
    eprintln!(
        "grid complete: {} cells under {}",
        results.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_cost_report(args: &CostReportArgs) -> Result<(), Error> {
    for (name, value) in [
        ("samples_k", args.samples_k),
        ("train_n", args.train_n),
        ("test_m", args.test_m),
        ("omega", args.omega),
        ("weights_p", args.weights_p),
    ] {
        if value == 0 {
            return Err(Error::Config(format!("{name} must be positive")));
        }
    }
    if args.epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let dims = CostDims {
        samples_k: args.samples_k,
        train_n: args.train_n,
        test_m: args.test_m,
        neuron_count: args.omega,
        weight_count: args.weights_p,
    };
    let terms = CostTerms {
        r_a: args.r_a,
        r_delta: args.r_delta,
        r_w: args.r_w,
        r: args.r_a + args.r_delta + args.r_w,
        skipped_zero_norm_terms: 0,
    };
    let report = runtime_report(
        &dims,
        &terms,
        args.r_e,
        args.epsilon,
        BTreeMap::new(),
        args.quantum_inference,
    );
    let mut text = serde_json::to_string_pretty(&report).map_err(Error::Json)?;
    text.push('\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::RankTooLarge { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::IpeScan(args) => cmd_ipe_scan(args),
        Command::Run(args) => cmd_run(args),
        Command::Grid(args) => cmd_grid(args),
        Command::CostReport(args) => cmd_cost_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
