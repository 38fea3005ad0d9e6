//! Experiment orchestration: data generation and ingestion, the four
//! classical/quantum mode combinations, posterior-predictive evaluation, and
//! figure-ready artifact files.

mod data;
mod experiment;
mod predict;
mod scan;

pub use data::{
    gen_binclass, gen_linreg, load_csv_dataset, split_dataset, standardize_split, ColumnStats,
    CsvDataset,
};
pub use experiment::{
    load_config, run_experiment, run_experiment_ablated, DataConfig, ExperimentConfig,
    ExperimentOutput, Metrics, Mode, ModelConfig, SamplerKind, SamplerSettings, SplitConfig,
    TaskKind,
};
pub use predict::{
    log_likelihood_metric, posterior_predictive, predictive_draws, predictive_log_likelihood,
    summarize, PointPrediction, PredictiveDraws,
};
pub use scan::{ipe_noise_scan, linspace, write_noise_scan, NoiseScan};
