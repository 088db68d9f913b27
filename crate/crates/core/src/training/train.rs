//! Simulated data-parallel training over `K` workers.
//!
//! Every iteration each worker samples a batch from the training nodes it
//! owns, builds a plan, and computes gradients against the shared model.
//! Gradients are averaged in worker order and applied once, so results do
//! not depend on how the workers were scheduled.

use log::warn;
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeSet, Split, WeightedGraph};
use crate::linalg::Matrix;
use crate::partition::Partition;
use crate::rng::stream_rng;
use crate::sampling::SamplerConfig;
use crate::training::model::{forward, step, GcnModel};
use crate::training::plan::{ladies_plan, saint_plan, SamplePlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    /// Layer-wise sampling from the neighbors of the layer above.
    Ladies,
    /// One subgraph drawn from all training nodes.
    Saint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub plan: PlanKind,
    /// `budget` is the per-layer draw count for layer-wise plans and the
    /// subgraph size for subgraph plans.
    pub sampler: SamplerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} < 0",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Remote nodes sampled, per epoch, worker and layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    n_epochs: usize,
    n_workers: usize,
    n_layers: usize,
    counts: Vec<u64>,
    starvation: u64,
}

impl CommLedger {
    pub fn new(n_epochs: usize, n_workers: usize, n_layers: usize) -> Self {
        Self {
            n_epochs,
            n_workers,
            n_layers,
            counts: vec![0; n_epochs * n_workers * n_layers],
            starvation: 0,
        }
    }

    fn slot(&self, epoch: usize, worker: usize, layer: usize) -> usize {
        (epoch * self.n_workers + worker) * self.n_layers + layer
    }

    pub fn record(&mut self, epoch: usize, worker: usize, layer: usize, remote: u64) {
        let k = self.slot(epoch, worker, layer);
        self.counts[k] += remote;
    }

    pub fn record_starvation(&mut self, events: u64) {
        self.starvation += events;
    }

    pub fn get(&self, epoch: usize, worker: usize, layer: usize) -> u64 {
        self.counts[self.slot(epoch, worker, layer)]
    }

    pub fn epoch_worker_total(&self, epoch: usize, worker: usize) -> u64 {
        (0..self.n_layers).map(|l| self.get(epoch, worker, l)).sum()
    }

    pub fn epoch_total(&self, epoch: usize) -> u64 {
        (0..self.n_workers)
            .map(|w| self.epoch_worker_total(epoch, w))
            .sum()
    }

    pub fn layer_total(&self, layer: usize) -> u64 {
        (0..self.n_epochs)
            .flat_map(|e| (0..self.n_workers).map(move |w| (e, w)))
            .map(|(e, w)| self.get(e, w, layer))
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn starvation(&self) -> u64 {
        self.starvation
    }

    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }
}

/// One row of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub worker: usize,
    /// Mean training loss over the worker's iterations.
    pub loss: f64,
    /// Accuracy of the sampled forward pass on the worker's batches.
    pub train_acc: f64,
    /// Full-inference validation accuracy after the epoch.
    pub val_acc: Option<f64>,
    pub comm_nodes_epoch: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub comm_nodes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub records: Vec<EpochRecord>,
    pub epochs: Vec<EpochSummary>,
}

impl Metrics {
    pub fn best_val_acc(&self) -> Option<f64> {
        self.epochs
            .iter()
            .filter_map(|e| e.val_acc)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Test accuracy at the first epoch reaching the best validation accuracy.
    pub fn test_at_best_val(&self) -> Option<f64> {
        let best = self.best_val_acc()?;
        self.epochs
            .iter()
            .find(|e| e.val_acc == Some(best))
            .and_then(|e| e.test_acc)
    }

    pub fn best_test_acc(&self) -> Option<f64> {
        self.epochs
            .iter()
            .filter_map(|e| e.test_acc)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    pub fn final_epoch(&self) -> Option<&EpochSummary> {
        self.epochs.last()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: GcnModel,
    pub metrics: Metrics,
    pub ledger: CommLedger,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalScore {
    pub accuracy: f64,
    pub micro_f1: f64,
}

/// Predicted class of every node in `nodes`, using the exact operator.
pub fn predict(model: &GcnModel, g: &WeightedGraph, nodes: &NodeSet) -> Result<Vec<usize>> {
    let features = g.features().ok_or(Error::MissingData("features"))?;
    let plan = SamplePlan::exact(g, nodes, model.n_layers())?;
    let logits = forward(model, &plan, features)?;
    Ok((0..logits.rows()).map(|r| logits.argmax_row(r)).collect())
}

/// Accuracy and micro-F1 of full (unsampled) inference on `nodes`.
pub fn evaluate(model: &GcnModel, g: &WeightedGraph, nodes: &NodeSet) -> Result<EvalScore> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate on an empty node set".into(),
        ));
    }
    let labels = g.labels().ok_or(Error::MissingData("labels"))?;
    let predicted = predict(model, g, nodes)?;
    Ok(score(
        &predicted,
        nodes.iter().map(|j| labels[j as usize] as usize),
    ))
}

fn score(predicted: &[usize], truth: impl Iterator<Item = usize>) -> EvalScore {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, t) in predicted.iter().zip(truth) {
        if p == t {
            tp += 1;
        } else {
            // a wrong prediction is a false positive for `p` and a false
            // negative for `t`
            fp += 1;
            fn_ += 1;
        }
    }
    let n = predicted.len() as f64;
    let denom = (2 * tp + fp + fn_) as f64;
    EvalScore {
        accuracy: tp as f64 / n,
        micro_f1: if denom > 0.0 {
            2.0 * tp as f64 / denom
        } else {
            0.0
        },
    }
}

struct WorkerStep {
    loss: f64,
    correct: usize,
    seen: usize,
    grads: Vec<Matrix>,
    remote_per_layer: Vec<usize>,
    starvation: usize,
}

struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

fn apply_update(
    model: &mut GcnModel,
    grads: &[Matrix],
    lr: f64,
    optimizer: Optimizer,
    adam: &mut Option<AdamState>,
) {
    match optimizer {
        Optimizer::Sgd => {
            for (w, g) in model.weights_mut().iter_mut().zip(grads) {
                w.axpy(-lr, g);
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let state = adam.get_or_insert_with(|| AdamState {
                m: grads
                    .iter()
                    .map(|g| Matrix::zeros(g.rows(), g.cols()))
                    .collect(),
                v: grads
                    .iter()
                    .map(|g| Matrix::zeros(g.rows(), g.cols()))
                    .collect(),
                t: 0,
            });
            state.t += 1;
            let c1 = 1.0 - beta1.powi(state.t);
            let c2 = 1.0 - beta2.powi(state.t);
            for (l, w) in model.weights_mut().iter_mut().enumerate() {
                let (m, v, g) = (&mut state.m[l], &mut state.v[l], &grads[l]);
                for k in 0..g.as_slice().len() {
                    let gk = g.as_slice()[k];
                    let mk = &mut m.as_mut_slice()[k];
                    *mk = beta1 * *mk + (1.0 - beta1) * gk;
                    let vk = &mut v.as_mut_slice()[k];
                    *vk = beta2 * *vk + (1.0 - beta2) * gk * gk;
                    let update =
                        lr * (m.as_slice()[k] / c1) / ((v.as_slice()[k] / c2).sqrt() + eps);
                    w.as_mut_slice()[k] -= update;
                }
            }
        }
    }
}

fn eval_split(model: &GcnModel, g: &WeightedGraph, nodes: &NodeSet) -> Result<Option<f64>> {
    if nodes.is_empty() {
        return Ok(None);
    }
    evaluate(model, g, nodes).map(|s| Some(s.accuracy))
}

/// Trains `model` with `partition.n_workers()` simulated workers.
///
/// One epoch is `ceil(max_w |train_w| / batch_size)` synchronized iterations,
/// where `train_w` are the training nodes owned by worker `w`. Workers that
/// own no training nodes sit out and the average is taken over the rest.
pub fn train_distributed(
    g: &WeightedGraph,
    partition: &Partition,
    model: GcnModel,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let features = g.features().ok_or(Error::MissingData("features"))?;
    let labels = g.labels().ok_or(Error::MissingData("labels"))?;
    let masks = g.masks().ok_or(Error::MissingData("masks"))?;
    if partition.n_nodes() != g.n_nodes() {
        return Err(Error::Dimension(format!(
            "partition covers {} nodes, graph has {}",
            partition.n_nodes(),
            g.n_nodes()
        )));
    }
    if model.n_classes() < g.n_classes() {
        return Err(Error::Dimension(format!(
            "model predicts {} classes, labels use {}",
            model.n_classes(),
            g.n_classes()
        )));
    }
    let train = masks.nodes(Split::Train);
    if train.is_empty() {
        return Err(Error::InvalidArgument("training mask is empty".into()));
    }
    let val = masks.nodes(Split::Val);
    let test = masks.nodes(Split::Test);

    let k = partition.n_workers();
    let n_layers = model.n_layers();
    let local_train: Vec<NodeSet> = (0..k)
        .map(|w| partition.split_local_remote(&train, w).0)
        .collect();
    for (w, nodes) in local_train.iter().enumerate() {
        if nodes.is_empty() {
            warn!("worker {w} owns no training nodes and is skipped");
        }
    }
    let largest = local_train.iter().map(NodeSet::len).max().unwrap_or(0);
    let iterations = largest.div_ceil(cfg.batch_size);

    let mut model = model;
    let mut adam = None;
    let mut ledger = CommLedger::new(cfg.epochs, k, n_layers);
    let mut metrics = Metrics::default();

    for epoch in 0..cfg.epochs {
        let mut loss_sum = vec![0.0; k];
        let mut iters_done = vec![0usize; k];
        let mut correct = vec![0usize; k];
        let mut seen = vec![0usize; k];

        for it in 0..iterations {
            let steps: Vec<Option<WorkerStep>> = (0..k)
                .into_par_iter()
                .map(|w| -> Result<Option<WorkerStep>> {
                    let pool = &local_train[w];
                    if pool.is_empty() {
                        return Ok(None);
                    }
                    let mut rng = stream_rng(
                        cfg.seed,
                        "worker-step",
                        &[epoch as u64, it as u64, w as u64],
                    );
                    let plan = match cfg.plan {
                        PlanKind::Ladies => {
                            let size = cfg.batch_size.min(pool.len());
                            let batch: NodeSet = sample_indices(&mut rng, pool.len(), size)
                                .into_iter()
                                .map(|i| pool.as_slice()[i])
                                .collect();
                            ladies_plan(g, partition, w, &batch, &cfg.sampler, n_layers, &mut rng)?
                        }
                        PlanKind::Saint => saint_plan(
                            g,
                            partition,
                            w,
                            &train,
                            cfg.sampler.budget,
                            &cfg.sampler,
                            n_layers,
                            &mut rng,
                        )?,
                    };
                    let out = step(&model, &plan, features, labels)?;
                    let hits = plan
                        .output
                        .iter()
                        .enumerate()
                        .filter(|&(r, j)| out.logits.argmax_row(r) == labels[j as usize] as usize)
                        .count();
                    Ok(Some(WorkerStep {
                        loss: out.loss,
                        correct: hits,
                        seen: plan.output.len(),
                        grads: out.grads,
                        remote_per_layer: plan.remote_per_layer(),
                        starvation: plan.starvation,
                    }))
                })
                .collect::<Result<_>>()?;

            let mut avg: Option<Vec<Matrix>> = None;
            let mut contributors = 0usize;
            for (w, s) in steps.iter().enumerate() {
                let Some(s) = s else { continue };
                contributors += 1;
                loss_sum[w] += s.loss;
                iters_done[w] += 1;
                correct[w] += s.correct;
                seen[w] += s.seen;
                for (layer, &r) in s.remote_per_layer.iter().enumerate() {
                    ledger.record(epoch, w, layer, r as u64);
                }
                ledger.record_starvation(s.starvation as u64);
                match avg.as_mut() {
                    None => avg = Some(s.grads.clone()),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&s.grads) {
                            a.axpy(1.0, g);
                        }
                    }
                }
            }
            if let Some(mut grads) = avg {
                let inv = 1.0 / contributors as f64;
                grads.iter_mut().for_each(|g| g.scale(inv));
                apply_update(&mut model, &grads, cfg.lr, cfg.optimizer, &mut adam);
            }
        }

        let val_acc = eval_split(&model, g, &val)?;
        let test_acc = eval_split(&model, g, &test)?;
        let mut epoch_loss = 0.0;
        let mut epoch_iters = 0usize;
        for w in 0..k {
            if iters_done[w] == 0 {
                continue;
            }
            epoch_loss += loss_sum[w];
            epoch_iters += iters_done[w];
            metrics.records.push(EpochRecord {
                epoch,
                worker: w,
                loss: loss_sum[w] / iters_done[w] as f64,
                train_acc: correct[w] as f64 / seen[w] as f64,
                val_acc,
                comm_nodes_epoch: ledger.epoch_worker_total(epoch, w),
            });
        }
        let total_seen: usize = seen.iter().sum();
        metrics.epochs.push(EpochSummary {
            epoch,
            loss: if epoch_iters > 0 {
                epoch_loss / epoch_iters as f64
            } else {
                f64::NAN
            },
            train_acc: if total_seen > 0 {
                correct.iter().sum::<usize>() as f64 / total_seen as f64
            } else {
                f64::NAN
            },
            val_acc,
            test_acc,
            comm_nodes: ledger.epoch_total(epoch),
        });
    }

    Ok(TrainOutcome {
        model,
        metrics,
        ledger,
    })
}
