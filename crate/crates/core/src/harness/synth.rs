use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Masks, NodeId, Split, WeightedGraph};
use crate::linalg::Matrix;
use crate::rng::stream_rng;

/// Stochastic block model with block-indicator features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSpec {
    pub n_nodes: usize,
    pub n_blocks: usize,
    /// Edge probability within a block.
    pub p_in: f64,
    /// Edge probability across blocks.
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_nodes == 0 || self.n_blocks == 0 {
            return bad("n_nodes and n_blocks must be at least 1".into());
        }
        if self.n_blocks > self.n_nodes {
            return bad(format!(
                "{} blocks for {} nodes",
                self.n_blocks, self.n_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!(
                "edge probabilities {} / {} outside [0, 1]",
                self.p_in, self.p_out
            ));
        }
        if self.p_out > self.p_in {
            return bad(format!("p_out {} exceeds p_in {}", self.p_out, self.p_in));
        }
        if self.feature_dim < self.n_blocks {
            return bad(format!(
                "feature_dim {} cannot hold a {}-block indicator",
                self.feature_dim, self.n_blocks
            ));
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise {} < 0", self.noise));
        }
        Ok(())
    }

    pub fn expected_edges(&self) -> f64 {
        let sizes = block_sizes(self.n_nodes, self.n_blocks);
        let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
        let within: f64 = sizes.iter().map(|&s| pairs(s)).sum();
        let cross = pairs(self.n_nodes) - within;
        within * self.p_in + cross * self.p_out
    }
}

fn block_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|b| n / k + usize::from(b < n % k)).collect()
}

/// Generates an un-normalized graph with features, labels and a 70/15/15
/// train/val/test split.
///
/// Block sizes are balanced and blocks are assigned to a seeded shuffle of
/// the node ids, so id order carries no block information. The label of a
/// node is its block; its features are the block indicator in the first
/// `n_blocks` coordinates plus `N(0, noise^2)` on every coordinate.
pub fn synth_sbm(spec: &SbmSpec) -> Result<WeightedGraph> {
    spec.validate()?;
    let n = spec.n_nodes;
    if spec.p_in == 0.0 && n > 1 {
        warn!("p_in = p_out = 0: the graph has no edges");
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, "sbm-blocks", &[]));
    let mut block = vec![0u32; n];
    let mut pos = 0;
    for (b, size) in block_sizes(n, spec.n_blocks).into_iter().enumerate() {
        for &node in &order[pos..pos + size] {
            block[node] = b as u32;
        }
        pos += size;
    }

    let mut rng = stream_rng(spec.seed, "sbm-edges", &[]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i as NodeId, j as NodeId));
            }
        }
    }

    let mut features = Matrix::zeros(n, spec.feature_dim);
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = stream_rng(spec.seed, "sbm-features", &[]);
        features
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = normal.sample(&mut rng));
    }
    for (i, &b) in block.iter().enumerate() {
        features[(i, b as usize)] += 1.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, "sbm-masks", &[]));
    let n_train = (0.70 * n as f64).round() as usize;
    let n_val = (0.15 * n as f64).round() as usize;
    let mut split = vec![None; n];
    for (rank, &node) in order.iter().enumerate() {
        split[node] = Some(if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        });
    }

    WeightedGraph::from_edges(n, edges)?
        .with_features(features)?
        .with_labels(block)?
        .with_masks(Masks::new(split))
}
