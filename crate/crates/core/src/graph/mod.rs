//! Undirected graph in CSR form with symmetric GCN normalization.
//!
//! Edge weights come only from [`WeightedGraph::normalize_weights`], which adds
//! a self-loop to every row and sets `w_ij = 1 / sqrt(d_i * d_j)` where the
//! degree counts the self-loop. That is the operator `D^-1/2 (A + I) D^-1/2`
//! used by every layer of the model.

mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use io::{
    load_dataset_dir, load_edge_list, load_features, load_labels, load_masks, parse_edge_list,
    write_dataset_dir, write_edge_list, DATASET_FILES,
};

pub type NodeId = u32;

/// Sorted, duplicate-free set of node ids.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSet(Vec<NodeId>);

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

impl NodeSet {
    pub fn new(mut ids: Vec<NodeId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    /// Wraps ids that are already strictly increasing.
    pub fn from_sorted(ids: Vec<NodeId>) -> Self {
        debug_assert!(
            ids.windows(2).all(|w| w[0] < w[1]),
            "ids not strictly increasing"
        );
        Self(ids)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{0, 1, ..., n-1}`
    pub fn all(n: usize) -> Self {
        Self((0..n as NodeId).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Position of `id` in the sorted order.
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.0.binary_search(&id).ok()
    }

    pub fn into_vec(self) -> Vec<NodeId> {
        self.0
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        NodeSet(out)
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn check_bounds(&self, n_nodes: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last as usize >= n_nodes => Err(Error::NodeOutOfRange {
                id: u64::from(last),
                n_nodes,
            }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        NodeSet::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Per-node split assignment. A node may belong to no split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Masks {
    split: Vec<Option<Split>>,
}

impl Masks {
    pub fn new(split: Vec<Option<Split>>) -> Self {
        Self { split }
    }

    pub fn len(&self) -> usize {
        self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.split.is_empty()
    }

    pub fn split_of(&self, node: NodeId) -> Option<Split> {
        self.split[node as usize]
    }

    pub fn nodes(&self, which: Split) -> NodeSet {
        NodeSet::from_sorted(
            self.split
                .iter()
                .enumerate()
                .filter(|(_, s)| **s == Some(which))
                .map(|(i, _)| i as NodeId)
                .collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct WeightedGraph {
    n_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    weights: Vec<f64>,
    normalized: bool,
    features: Option<Matrix>,
    labels: Option<Vec<u32>>,
    masks: Option<Masks>,
}

impl WeightedGraph {
    /// Builds an undirected, unweighted graph. Every edge is stored in both
    /// rows, duplicates collapse, and all weights are 1.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n_nodes > NodeId::MAX as usize + 1 {
            return Err(Error::IdOverflow(n_nodes as u64 - 1));
        }
        let mut rows: Vec<Vec<NodeId>> = vec![Vec::new(); n_nodes];
        for (u, v) in edges {
            for id in [u, v] {
                if id as usize >= n_nodes {
                    return Err(Error::NodeOutOfRange {
                        id: u64::from(id),
                        n_nodes,
                    });
                }
            }
            rows[u as usize].push(v);
            if u != v {
                rows[v as usize].push(u);
            }
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        let weights = vec![1.0; neighbors.len()];
        Ok(Self {
            n_nodes,
            offsets,
            neighbors,
            weights,
            normalized: false,
            features: None,
            labels: None,
            masks: None,
        })
    }

    /// Adds a self-loop to every row and sets `w_ij = 1/sqrt(d_i d_j)`.
    /// Already-normalized graphs are returned unchanged.
    pub fn normalize_weights(self) -> Self {
        if self.normalized {
            return self;
        }
        let n = self.n_nodes;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(self.neighbors.len() + n);
        for i in 0..n {
            let row = &self.neighbors[self.offsets[i]..self.offsets[i + 1]];
            let me = i as NodeId;
            match row.binary_search(&me) {
                Ok(_) => neighbors.extend_from_slice(row),
                Err(at) => {
                    neighbors.extend_from_slice(&row[..at]);
                    neighbors.push(me);
                    neighbors.extend_from_slice(&row[at..]);
                }
            }
            offsets.push(neighbors.len());
        }
        let degree: Vec<f64> = offsets.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let mut weights = Vec::with_capacity(neighbors.len());
        for i in 0..n {
            for &j in &neighbors[offsets[i]..offsets[i + 1]] {
                weights.push(1.0 / (degree[i] * degree[j as usize]).sqrt());
            }
        }
        Self {
            offsets,
            neighbors,
            weights,
            normalized: true,
            ..self
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of stored (directed) CSR entries.
    pub fn n_entries(&self) -> usize {
        self.neighbors.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn row(&self, i: NodeId) -> (&[NodeId], &[f64]) {
        let (a, b) = (self.offsets[i as usize], self.offsets[i as usize + 1]);
        (&self.neighbors[a..b], &self.weights[a..b])
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.offsets[i as usize + 1] - self.offsets[i as usize]
    }

    pub fn weight(&self, i: NodeId, j: NodeId) -> Option<f64> {
        let (nbrs, w) = self.row(i);
        nbrs.binary_search(&j).ok().map(|k| w[k])
    }

    /// Undirected edges as `(u, v)` with `u <= v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n_nodes as NodeId).flat_map(move |u| {
            self.row(u)
                .0
                .iter()
                .copied()
                .filter(move |&v| u <= v)
                .map(move |v| (u, v))
        })
    }

    /// `N(s)`: union of the adjacency rows of `s`. After normalization every
    /// row holds its self-loop, so `s` is a subset of the result.
    pub fn neighbor_union(&self, s: &NodeSet) -> Result<NodeSet> {
        s.check_bounds(self.n_nodes)?;
        let mut seen = vec![false; self.n_nodes];
        let mut out = Vec::new();
        for i in s.iter() {
            for &j in self.row(i).0 {
                if !seen[j as usize] {
                    seen[j as usize] = true;
                    out.push(j);
                }
            }
        }
        Ok(NodeSet::new(out))
    }

    /// `||w_*j||^2 = sum_{i in s_l} w_ij^2` for each candidate `j`.
    ///
    /// Every candidate must be adjacent to some node of `s_l`.
    pub fn column_norms(&self, s_l: &NodeSet, candidates: &NodeSet) -> Result<Vec<f64>> {
        s_l.check_bounds(self.n_nodes)?;
        candidates.check_bounds(self.n_nodes)?;
        let mut norms = vec![0.0; candidates.len()];
        for i in s_l.iter() {
            let (nbrs, w) = self.row(i);
            for (&j, &wij) in nbrs.iter().zip(w) {
                if let Some(p) = candidates.position(j) {
                    norms[p] += wij * wij;
                }
            }
        }
        if let Some(k) = norms.iter().position(|&v| v <= 0.0) {
            return Err(Error::NotANeighbor(candidates.as_slice()[k]));
        }
        Ok(norms)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, Matrix::cols)
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn masks(&self) -> Option<&Masks> {
        self.masks.as_ref()
    }

    pub fn n_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m as usize + 1)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n_nodes {
            return Err(Error::Dimension(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.rows(),
                self.n_nodes
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n_nodes {
            return Err(Error::Dimension(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n_nodes
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        if masks.len() != self.n_nodes {
            return Err(Error::Dimension(format!(
                "{} mask entries for {} nodes",
                masks.len(),
                self.n_nodes
            )));
        }
        self.masks = Some(masks);
        Ok(self)
    }
}
