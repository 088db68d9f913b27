//! Runs every (mode, D) cell of a config and writes the result files.
//!
//! Output directory layout:
//!
//! ```text
//! <out_dir>/
//!   metrics_<mode>_<D>.csv   one per cell; D is 0 for full and local
//!   summary.json             dataset facts and one entry per cell
//!   comparison.json          communication reduction of each skewed cell vs full
//! ```
//!
//! Every file is a pure function of the config, so two runs of the same
//! config produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{load_dataset_dir, Split, WeightedGraph};
use crate::harness::config::ExperimentConfig;
use crate::harness::synth::synth_sbm;
use crate::partition::{partition_nodes, Partition};
use crate::rng::stream_rng;
use crate::sampling::{SamplerConfig, SamplingMode};
use crate::training::{train_distributed, GcnModel, Metrics, TrainConfig};

pub const METRICS_HEADER: &str = "epoch,worker,loss,train_acc,val_acc,comm_nodes_epoch";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_nodes: usize,
    /// Undirected edges, self-loops excluded.
    pub n_edges: usize,
    pub isolated_nodes: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub feature_dim: usize,
    pub n_classes: usize,
    pub class_counts: Vec<usize>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl DatasetStats {
    pub fn of(g: &WeightedGraph) -> Self {
        let n = g.n_nodes();
        let mut degree = vec![0usize; n];
        let mut n_edges = 0;
        for (u, v) in g.edges() {
            if u != v {
                n_edges += 1;
                degree[u as usize] += 1;
                degree[v as usize] += 1;
            }
        }
        let mut class_counts = vec![0; g.n_classes()];
        for &l in g.labels().unwrap_or(&[]) {
            class_counts[l as usize] += 1;
        }
        let count = |s| g.masks().map_or(0, |m| m.nodes(s).len());
        DatasetStats {
            n_nodes: n,
            n_edges,
            isolated_nodes: degree.iter().filter(|&&d| d == 0).count(),
            max_degree: degree.iter().copied().max().unwrap_or(0),
            mean_degree: if n > 0 {
                2.0 * n_edges as f64 / n as f64
            } else {
                0.0
            },
            feature_dim: g.feature_dim(),
            n_classes: g.n_classes(),
            class_counts,
            n_train: count(Split::Train),
            n_val: count(Split::Val),
            n_test: count(Split::Test),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: SamplingMode,
    /// `None` for full and local cells.
    pub d: Option<f64>,
    pub metrics_file: String,
    pub total_comm: u64,
    pub comm_per_layer: Vec<u64>,
    pub starvation_events: u64,
    pub final_loss: f64,
    pub final_val_acc: Option<f64>,
    pub best_val_acc: Option<f64>,
    pub final_test_acc: Option<f64>,
    pub best_test_acc: Option<f64>,
    pub test_at_best_val: Option<f64>,
    /// Full-mode total divided by this cell's total; present for skewed cells
    /// when a full cell was run.
    pub reduction_vs_full: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub workers: usize,
    pub sampler: String,
    pub budget: usize,
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub dataset: DatasetStats,
    pub cells: Vec<CellSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub d: f64,
    pub total_comm: u64,
    pub reduction_factor: f64,
    pub best_val_acc: Option<f64>,
    pub val_acc_delta_vs_full: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub baseline: String,
    pub full_total_comm: Option<u64>,
    pub full_best_val_acc: Option<f64>,
    pub reductions: Vec<ComparisonEntry>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub comparison: Comparison,
    pub metrics: Vec<Metrics>,
}

/// Loads or synthesizes the dataset and normalizes it.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<WeightedGraph> {
    let g = match (&cfg.dataset.path, &cfg.dataset.sbm) {
        (Some(path), None) => load_dataset_dir(path)?,
        (None, Some(spec)) => synth_sbm(spec)?,
        _ => return Err(Error::Config("dataset: exactly one of path or sbm".into())),
    };
    for (what, present) in [
        ("features", g.features().is_some()),
        ("labels", g.labels().is_some()),
        ("masks", g.masks().is_some()),
    ] {
        if !present {
            return Err(Error::MissingData(what));
        }
    }
    Ok(g.normalize_weights())
}

pub fn cell_file_name(mode: SamplingMode, d: Option<f64>) -> String {
    format!("metrics_{}_{}.csv", mode, d.unwrap_or(0.0))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(metrics: &Metrics) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &metrics.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.worker,
            r.loss,
            r.train_acc,
            fmt_opt(r.val_acc),
            r.comm_nodes_epoch
        );
    }
    out
}

fn cells(cfg: &ExperimentConfig) -> Vec<(SamplingMode, Option<f64>)> {
    let mut out = Vec::new();
    for &mode in &cfg.train.modes {
        match mode {
            SamplingMode::Skewed => out.extend(cfg.train.d_values.iter().map(|&d| (mode, Some(d)))),
            _ => out.push((mode, None)),
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Model with the shared initialization every cell starts from.
pub fn initial_model(cfg: &ExperimentConfig, g: &WeightedGraph) -> Result<GcnModel> {
    let mut dims = vec![g.feature_dim()];
    dims.extend(std::iter::repeat_n(cfg.model.hidden, cfg.model.layers - 1));
    dims.push(g.n_classes());
    GcnModel::new(&dims, &mut stream_rng(cfg.seed, "model-init", &[]))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let g = load_dataset(cfg)?;
    let partition: Partition = partition_nodes(
        g.n_nodes(),
        cfg.partition.workers,
        cfg.partition.strategy()?,
    )?;
    let init = initial_model(cfg, &g)?;
    let draws = cfg.sampler.draws()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let mut summaries = Vec::new();
    let mut all_metrics = Vec::new();
    for (mode, d) in cells(cfg) {
        let train_cfg = TrainConfig {
            plan: cfg.sampler.kind,
            sampler: SamplerConfig {
                budget: draws,
                skew_constant: d.unwrap_or(0.0),
                mode,
                clamp_s_min: cfg.sampler.clamp_s_min,
            },
            epochs: cfg.train.epochs,
            batch_size: cfg.train.batch_size,
            lr: cfg.train.lr,
            optimizer: cfg.train.optimizer(),
            seed: cfg.seed,
        };
        let outcome = train_distributed(&g, &partition, init.clone(), &train_cfg)?;
        let file = cell_file_name(mode, d);
        write_file(&cfg.out_dir.join(&file), &metrics_csv(&outcome.metrics))?;
        let m = &outcome.metrics;
        let last = m.final_epoch();
        summaries.push(CellSummary {
            mode,
            d,
            metrics_file: file,
            total_comm: outcome.ledger.total(),
            comm_per_layer: (0..outcome.ledger.n_layers())
                .map(|l| outcome.ledger.layer_total(l))
                .collect(),
            starvation_events: outcome.ledger.starvation(),
            final_loss: last.map_or(f64::NAN, |e| e.loss),
            final_val_acc: last.and_then(|e| e.val_acc),
            best_val_acc: m.best_val_acc(),
            final_test_acc: last.and_then(|e| e.test_acc),
            best_test_acc: m.best_test_acc(),
            test_at_best_val: m.test_at_best_val(),
            reduction_vs_full: None,
        });
        all_metrics.push(outcome.metrics);
    }

    let full = summaries
        .iter()
        .find(|c| c.mode == SamplingMode::Full)
        .map(|c| (c.total_comm, c.best_val_acc));
    let mut reductions = Vec::new();
    for cell in summaries
        .iter_mut()
        .filter(|c| c.mode == SamplingMode::Skewed)
    {
        let Some((full_comm, full_val)) = full else {
            break;
        };
        let factor = full_comm as f64 / cell.total_comm as f64;
        cell.reduction_vs_full = Some(factor);
        reductions.push(ComparisonEntry {
            d: cell.d.unwrap_or(0.0),
            total_comm: cell.total_comm,
            reduction_factor: factor,
            best_val_acc: cell.best_val_acc,
            val_acc_delta_vs_full: cell.best_val_acc.zip(full_val).map(|(a, b)| a - b),
        });
    }

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        workers: cfg.partition.workers,
        sampler: serde_json::to_value(cfg.sampler.kind)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        budget: draws,
        layers: cfg.model.layers,
        hidden: cfg.model.hidden,
        epochs: cfg.train.epochs,
        dataset: DatasetStats::of(&g),
        cells: summaries,
    };
    let comparison = Comparison {
        schema_version: SCHEMA_VERSION,
        baseline: "full".into(),
        full_total_comm: full.map(|f| f.0),
        full_best_val_acc: full.and_then(|f| f.1),
        reductions,
    };
    write_file(
        &cfg.out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    write_file(
        &cfg.out_dir.join("comparison.json"),
        &(serde_json::to_string_pretty(&comparison)? + "\n"),
    )?;
    Ok(ExperimentReport {
        summary,
        comparison,
        metrics: all_metrics,
    })
}
