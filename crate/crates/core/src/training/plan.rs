//! Sample plans: per-layer node sets and the reweighted adjacency blocks.

use log::warn;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedGraph};
use crate::linalg::Matrix;
use crate::partition::Partition;
use crate::sampling::{
    draw_sample, linear_weights, skew_scale, skewed_weights, ProbDist, SampleDraw, SamplerConfig,
    SamplingMode,
};

/// Row-compressed block; column indices are positions in the lower node set.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseBlock {
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseBlock {
    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// `self * x`
    pub fn spmm(&self, x: &Matrix) -> Matrix {
        assert_eq!(self.n_cols, x.rows(), "spmm shape");
        let mut out = Matrix::zeros(self.n_rows(), x.cols());
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, xv) in out_row.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// `self^T * x`
    pub fn spmm_t(&self, x: &Matrix) -> Matrix {
        assert_eq!(self.n_rows(), x.rows(), "spmm_t shape");
        let mut out = Matrix::zeros(self.n_cols, x.cols());
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, xv) in out.row_mut(c).iter_mut().zip(x.row(r)) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows(), self.n_cols);
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// One layer of a plan: `H_upper = block * f(H_lower)`.
#[derive(Clone, Debug)]
pub struct PlanLayer {
    /// Lower node set `S_l` whose embeddings feed this layer.
    pub nodes: NodeSet,
    /// Rows over the upper set, entries `w_ij / p_j`.
    pub block: SparseBlock,
    /// Distribution the lower set was drawn from; `None` when not sampled.
    pub dist: Option<ProbDist>,
    /// Sampled nodes owned by another worker.
    pub remote_sampled: usize,
}

#[derive(Clone, Debug)]
pub struct SamplePlan {
    /// Bottom to top: `layers[0]` maps `S_0` to `S_1`.
    pub layers: Vec<PlanLayer>,
    /// `S_M`, the nodes whose outputs are produced.
    pub output: NodeSet,
    /// Upper-set rows that had no candidate at all.
    pub starvation: usize,
}

impl SamplePlan {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_nodes(&self) -> &NodeSet {
        &self.layers[0].nodes
    }

    pub fn remote_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.remote_sampled).collect()
    }

    pub fn total_remote(&self) -> usize {
        self.layers.iter().map(|l| l.remote_sampled).sum()
    }

    /// Unsampled plan with the exact operator: `S_l = N(S_{l+1})` and block
    /// entries `w_ij`.
    pub fn exact(g: &WeightedGraph, output: &NodeSet, n_layers: usize) -> Result<SamplePlan> {
        if n_layers == 0 {
            return Err(Error::InvalidArgument(
                "a plan needs at least one layer".into(),
            ));
        }
        let mut layers = Vec::with_capacity(n_layers);
        let mut upper = output.clone();
        for _ in 0..n_layers {
            let lower = g.neighbor_union(&upper)?;
            let ones = vec![1.0; lower.len()];
            let (block, _) = build_block(g, &upper, &lower, &ones);
            layers.push(PlanLayer {
                nodes: lower.clone(),
                block,
                dist: None,
                remote_sampled: 0,
            });
            upper = lower;
        }
        layers.reverse();
        Ok(SamplePlan {
            layers,
            output: output.clone(),
            starvation: 0,
        })
    }
}

/// Rows over `upper`, entries `w_ij / p_j` for `j` in `lower ∩ N(i)`.
/// Also returns how many rows ended up empty.
fn build_block(
    g: &WeightedGraph,
    upper: &NodeSet,
    lower: &NodeSet,
    lower_p: &[f64],
) -> (SparseBlock, usize) {
    let mut offsets = Vec::with_capacity(upper.len() + 1);
    offsets.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut empty = 0;
    for i in upper.iter() {
        let (nbrs, w) = g.row(i);
        let before = cols.len();
        for (&j, &wij) in nbrs.iter().zip(w) {
            if let Some(k) = lower.position(j) {
                cols.push(k);
                vals.push(wij / lower_p[k]);
            }
        }
        if cols.len() == before {
            empty += 1;
        }
        offsets.push(cols.len());
    }
    (
        SparseBlock {
            n_cols: lower.len(),
            offsets,
            cols,
            vals,
        },
        empty,
    )
}

/// Candidate distribution for one sampling step, by mode.
fn candidate_dist(
    candidates: NodeSet,
    norms: &[f64],
    is_local: Vec<bool>,
    cfg: &SamplerConfig,
    saturated: bool,
) -> Result<ProbDist> {
    let n_remote = is_local.iter().filter(|&&l| !l).count();
    match cfg.mode {
        SamplingMode::Skewed if n_remote > 0 && !saturated => {
            let s = skew_scale(
                cfg.skew_constant,
                candidates.len(),
                cfg.budget,
                n_remote,
                cfg.clamp_s_min,
            )?;
            skewed_weights(candidates, norms, is_local, s)
        }
        _ => linear_weights(candidates, norms, is_local),
    }
}

fn draw_or_saturate<R: Rng + ?Sized>(dist: &ProbDist, budget: usize, rng: &mut R) -> SampleDraw {
    if budget >= dist.len() {
        SampleDraw::saturated(dist.candidates(), budget)
    } else {
        draw_sample(dist, budget, rng)
    }
}

/// Layer-wise plan: each layer draws `B` nodes from the neighbors of the
/// layer above (or from their local part in local mode).
///
/// When the budget covers every candidate the whole candidate set is taken
/// with `p = 1`.
pub fn ladies_plan<R: Rng + ?Sized>(
    g: &WeightedGraph,
    partition: &Partition,
    worker: usize,
    batch: &NodeSet,
    cfg: &SamplerConfig,
    n_layers: usize,
    rng: &mut R,
) -> Result<SamplePlan> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("batch is empty".into()));
    }
    if n_layers == 0 {
        return Err(Error::InvalidArgument(
            "a plan needs at least one layer".into(),
        ));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut starvation = 0;
    let mut upper = batch.clone();
    for _ in 0..n_layers {
        let all = g.neighbor_union(&upper)?;
        let candidates = match cfg.mode {
            SamplingMode::Local => partition.split_local_remote(&all, worker).0,
            _ => all,
        };
        if cfg.mode == SamplingMode::Local {
            starvation += upper
                .iter()
                .filter(|&i| !g.row(i).0.iter().any(|&j| candidates.contains(j)))
                .count();
        }
        if candidates.is_empty() {
            let (block, _) = build_block(g, &upper, &candidates, &[]);
            layers.push(PlanLayer {
                nodes: candidates.clone(),
                block,
                dist: None,
                remote_sampled: 0,
            });
            upper = candidates;
            continue;
        }
        let norms = g.column_norms(&upper, &candidates)?;
        let is_local = partition.locality(&candidates, worker);
        let saturated = cfg.budget >= candidates.len();
        let dist = candidate_dist(candidates, &norms, is_local, cfg, saturated)?;
        let draw = draw_or_saturate(&dist, cfg.budget, rng);
        let (block, _) = build_block(g, &upper, &draw.sampled, &draw.sampled_p);
        let remote_sampled = draw
            .sampled
            .iter()
            .filter(|&j| !partition.is_local(j, worker))
            .count();
        layers.push(PlanLayer {
            nodes: draw.sampled.clone(),
            block,
            dist: Some(dist),
            remote_sampled,
        });
        upper = draw.sampled;
    }
    layers.reverse();
    Ok(SamplePlan {
        layers,
        output: batch.clone(),
        starvation,
    })
}

/// Subgraph plan: one node set drawn from the training nodes, shared by
/// every layer, with `1/p_j` column reweighting inside the induced subgraph.
///
/// Candidate weights are `sum_{i in train} w_ij^2`. Remote members are
/// charged once, at the input layer.
#[allow(clippy::too_many_arguments)]
pub fn saint_plan<R: Rng + ?Sized>(
    g: &WeightedGraph,
    partition: &Partition,
    worker: usize,
    train_nodes: &NodeSet,
    subgraph_size: usize,
    cfg: &SamplerConfig,
    n_layers: usize,
    rng: &mut R,
) -> Result<SamplePlan> {
    if train_nodes.is_empty() {
        return Err(Error::InvalidArgument("no training nodes".into()));
    }
    if n_layers == 0 {
        return Err(Error::InvalidArgument(
            "a plan needs at least one layer".into(),
        ));
    }
    let candidates = match cfg.mode {
        SamplingMode::Local => partition.split_local_remote(train_nodes, worker).0,
        _ => train_nodes.clone(),
    };
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "worker {worker} has no local training nodes"
        )));
    }
    let mut size = subgraph_size.max(1);
    if size > candidates.len() {
        warn!(
            "subgraph size {subgraph_size} exceeds the {} candidates, clamping",
            candidates.len()
        );
        size = candidates.len();
    }
    let cfg = SamplerConfig {
        budget: size,
        ..*cfg
    };
    cfg.validate()?;
    let norms = g.column_norms(train_nodes, &candidates)?;
    let is_local = partition.locality(&candidates, worker);
    let saturated = size >= candidates.len();
    let dist = candidate_dist(candidates, &norms, is_local, &cfg, saturated)?;
    let draw = draw_or_saturate(&dist, size, rng);
    let (block, _) = build_block(g, &draw.sampled, &draw.sampled, &draw.sampled_p);
    let remote = draw
        .sampled
        .iter()
        .filter(|&j| !partition.is_local(j, worker))
        .count();
    let layers = (0..n_layers)
        .map(|l| PlanLayer {
            nodes: draw.sampled.clone(),
            block: block.clone(),
            dist: (l == 0).then(|| dist.clone()),
            remote_sampled: if l == 0 { remote } else { 0 },
        })
        .collect();
    Ok(SamplePlan {
        layers,
        output: draw.sampled,
        starvation: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{partition_nodes, PartitionStrategy};
    use crate::rng::stream_rng;

    fn ring(n: u32) -> WeightedGraph {
        WeightedGraph::from_edges(n as usize, (0..n).map(|i| (i, (i + 1) % n)))
            .unwrap()
            .normalize_weights()
    }

    #[test]
    fn exact_plan_blocks_hold_weights() {
        let g = ring(6);
        let plan = SamplePlan::exact(&g, &NodeSet::new(vec![0]), 2).unwrap();
        assert_eq!(plan.layers[1].nodes.as_slice(), &[0, 1, 5]);
        assert_eq!(plan.layers[0].nodes.as_slice(), &[0, 1, 2, 4, 5]);
        let top = plan.layers[1].block.to_dense();
        assert_eq!(top.shape(), (1, 3));
        assert!(top
            .as_slice()
            .iter()
            .all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn saturated_ladies_plan_is_exact() {
        let g = ring(8);
        let p = partition_nodes(8, 2, PartitionStrategy::Contiguous).unwrap();
        let batch = NodeSet::new(vec![1, 2]);
        let cfg = SamplerConfig::new(100, SamplingMode::Full, 0.0);
        let plan = ladies_plan(&g, &p, 0, &batch, &cfg, 2, &mut stream_rng(1, "p", &[])).unwrap();
        let exact = SamplePlan::exact(&g, &batch, 2).unwrap();
        for (a, b) in plan.layers.iter().zip(&exact.layers) {
            assert_eq!(a.nodes, b.nodes);
            assert_eq!(a.block, b.block);
        }
        // layer 0 = N(N({1,2})) = {7,0,1,2,3,4}; 7 and 4 are remote to worker 0
        assert_eq!(plan.layers[0].remote_sampled, 2);
    }

    #[test]
    fn ladies_plan_respects_budget_and_mode() {
        let g = ring(40);
        let p = partition_nodes(40, 4, PartitionStrategy::Hash).unwrap();
        let batch = NodeSet::new(vec![0, 4, 8, 12]);
        for mode in [
            SamplingMode::Full,
            SamplingMode::Local,
            SamplingMode::Skewed,
        ] {
            let cfg = SamplerConfig::new(5, mode, 4.0);
            let plan =
                ladies_plan(&g, &p, 0, &batch, &cfg, 3, &mut stream_rng(2, "p", &[])).unwrap();
            assert_eq!(plan.n_layers(), 3);
            assert_eq!(plan.output, batch);
            let mut upper = batch.len();
            for layer in plan.layers.iter().rev() {
                assert!(layer.nodes.len() <= 5);
                assert_eq!(layer.block.n_rows(), upper);
                assert_eq!(layer.block.n_cols(), layer.nodes.len());
                upper = layer.nodes.len();
            }
            if mode == SamplingMode::Local {
                assert_eq!(plan.total_remote(), 0);
                assert!(plan
                    .layers
                    .iter()
                    .all(|l| l.nodes.iter().all(|j| p.is_local(j, 0))));
            }
        }
    }

    #[test]
    fn single_worker_skewed_matches_full() {
        let g = ring(30);
        let p = partition_nodes(30, 1, PartitionStrategy::Contiguous).unwrap();
        let batch = NodeSet::new(vec![3, 9, 20]);
        let full = SamplerConfig::new(4, SamplingMode::Full, 0.0);
        let skew = SamplerConfig::new(4, SamplingMode::Skewed, 8.0);
        let a = ladies_plan(&g, &p, 0, &batch, &full, 2, &mut stream_rng(5, "p", &[])).unwrap();
        let b = ladies_plan(&g, &p, 0, &batch, &skew, 2, &mut stream_rng(5, "p", &[])).unwrap();
        for (x, y) in a.layers.iter().zip(&b.layers) {
            assert_eq!(x.nodes, y.nodes);
            assert_eq!(x.block, y.block);
        }
    }

    #[test]
    fn saint_plan_saturated_and_clamped() {
        let g = ring(12);
        let p = partition_nodes(12, 2, PartitionStrategy::Contiguous).unwrap();
        let train = NodeSet::new(vec![0, 1, 2, 3, 6, 7, 8]);
        let cfg = SamplerConfig::new(1, SamplingMode::Full, 0.0);
        for size in [7, 50] {
            let plan = saint_plan(
                &g,
                &p,
                0,
                &train,
                size,
                &cfg,
                2,
                &mut stream_rng(1, "s", &[]),
            )
            .unwrap();
            assert_eq!(plan.output, train);
            assert_eq!(plan.layers[0].remote_sampled, 3);
            assert_eq!(plan.layers[1].remote_sampled, 0);
            // block equals the induced normalized adjacency
            let dense = plan.layers[0].block.to_dense();
            for (r, i) in train.iter().enumerate() {
                for (c, j) in train.iter().enumerate() {
                    assert_eq!(dense[(r, c)], g.weight(i, j).unwrap_or(0.0));
                }
            }
        }
    }

    #[test]
    fn saint_local_mode_stays_local() {
        let g = ring(20);
        let p = partition_nodes(20, 2, PartitionStrategy::Hash).unwrap();
        let train = NodeSet::all(20);
        let cfg = SamplerConfig::new(1, SamplingMode::Local, 0.0);
        let plan = saint_plan(&g, &p, 1, &train, 4, &cfg, 2, &mut stream_rng(1, "s", &[])).unwrap();
        assert!(plan.output.iter().all(|j| p.is_local(j, 1)));
        assert_eq!(plan.total_remote(), 0);
    }

    #[test]
    fn plan_arguments_are_checked() {
        let g = ring(6);
        let p = partition_nodes(6, 1, PartitionStrategy::Contiguous).unwrap();
        let cfg = SamplerConfig::new(2, SamplingMode::Full, 0.0);
        let mut rng = stream_rng(1, "p", &[]);
        assert!(ladies_plan(&g, &p, 0, &NodeSet::empty(), &cfg, 2, &mut rng).is_err());
        assert!(ladies_plan(&g, &p, 0, &NodeSet::all(2), &cfg, 0, &mut rng).is_err());
        let bad = SamplerConfig::new(0, SamplingMode::Full, 0.0);
        assert!(ladies_plan(&g, &p, 0, &NodeSet::all(2), &bad, 2, &mut rng).is_err());
        assert!(saint_plan(&g, &p, 0, &NodeSet::empty(), 3, &cfg, 2, &mut rng).is_err());
    }

    #[test]
    fn spmm_and_transpose_agree_with_dense() {
        let g = ring(7);
        let plan = SamplePlan::exact(&g, &NodeSet::new(vec![2, 5]), 1).unwrap();
        let block = &plan.layers[0].block;
        let x = Matrix::from_vec(
            block.n_cols(),
            2,
            (0..block.n_cols() * 2).map(|v| v as f64 - 3.0).collect(),
        );
        assert!(block.spmm(&x).max_abs_diff(&block.to_dense().matmul(&x)) < 1e-14);
        let y = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        assert!(
            block
                .spmm_t(&y)
                .max_abs_diff(&block.to_dense().t_matmul(&y))
                < 1e-14
        );
    }
}
