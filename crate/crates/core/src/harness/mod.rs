//! Experiment configuration, synthetic data and the experiment runner.

pub mod config;
pub mod experiment;
pub mod synth;

pub use config::{ExperimentConfig, Overrides};
pub use experiment::{
    cell_file_name, load_dataset, metrics_csv, run_experiment, CellSummary, Comparison,
    ComparisonEntry, DatasetStats, ExperimentReport, Summary, METRICS_HEADER,
};
pub use synth::{synth_sbm, SbmSpec};
