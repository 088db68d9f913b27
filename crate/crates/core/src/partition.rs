//! Node ownership across simulated workers.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum PartitionStrategy {
    /// Consecutive id ranges, the first `n % k` workers take one extra node.
    Contiguous,
    /// `owner = id mod k`.
    Hash,
    /// Seeded shuffle, then the contiguous split over the shuffled order.
    Random { seed: u64 },
    /// `node,worker` CSV.
    Explicit { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n_workers: usize,
    owner: Vec<u32>,
    strategy: PartitionStrategy,
}

/// Sizes of the balanced split of `n` items into `k` chunks.
fn balanced_owner(n: usize, k: usize) -> impl Iterator<Item = u32> {
    let (q, r) = (n / k, n % k);
    (0..k).flat_map(move |w| std::iter::repeat_n(w as u32, q + usize::from(w < r)))
}

pub fn partition_nodes(n: usize, k: usize, strategy: PartitionStrategy) -> Result<Partition> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "number of workers must be at least 1".into(),
        ));
    }
    let owner: Vec<u32> = match &strategy {
        PartitionStrategy::Contiguous => balanced_owner(n, k).collect(),
        PartitionStrategy::Hash => (0..n).map(|i| (i % k) as u32).collect(),
        PartitionStrategy::Random { seed } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream_rng(*seed, "partition", &[]));
            let mut owner = vec![0; n];
            for (&node, w) in order.iter().zip(balanced_owner(n, k)) {
                owner[node] = w;
            }
            owner
        }
        PartitionStrategy::Explicit { file } => read_partition_file(file, n, k)?,
    };
    Ok(Partition {
        n_workers: k,
        owner,
        strategy,
    })
}

fn read_partition_file(path: &Path, n: usize, k: usize) -> Result<Vec<u32>> {
    let source = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut owner: Vec<Option<u32>> = vec![None; n];
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = idx + 1;
        let err = |msg: String| Error::Parse {
            path: source.clone(),
            line,
            msg,
        };
        if rec.len() != 2 {
            return Err(err(format!(
                "expected `node,worker`, found {} fields",
                rec.len()
            )));
        }
        let (Ok(node), Ok(worker)) = (rec[0].parse::<usize>(), rec[1].parse::<u32>()) else {
            if idx == 0 {
                continue; // header
            }
            return Err(err(format!("cannot parse `{},{}`", &rec[0], &rec[1])));
        };
        if node >= n {
            return Err(err(format!("node {node} out of range ({n} nodes)")));
        }
        if worker as usize >= k {
            return Err(err(format!("worker {worker} out of range ({k} workers)")));
        }
        owner[node] = Some(worker);
    }
    owner
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            w.ok_or_else(|| Error::Parse {
                path: source.clone(),
                line: 0,
                msg: format!("node {i} has no worker"),
            })
        })
        .collect()
}

impl Partition {
    /// Partition from an explicit owner array.
    pub fn from_owner(owner: Vec<u32>, n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::InvalidArgument(
                "number of workers must be at least 1".into(),
            ));
        }
        if let Some(&bad) = owner.iter().find(|&&w| w as usize >= n_workers) {
            return Err(Error::InvalidArgument(format!(
                "worker {bad} out of range ({n_workers} workers)"
            )));
        }
        Ok(Self {
            n_workers,
            owner,
            strategy: PartitionStrategy::Explicit {
                file: PathBuf::new(),
            },
        })
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn n_nodes(&self) -> usize {
        self.owner.len()
    }

    pub fn strategy(&self) -> &PartitionStrategy {
        &self.strategy
    }

    pub fn owner(&self, node: NodeId) -> u32 {
        self.owner[node as usize]
    }

    pub fn is_local(&self, node: NodeId, worker: usize) -> bool {
        self.owner[node as usize] as usize == worker
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_workers];
        for &w in &self.owner {
            sizes[w as usize] += 1;
        }
        sizes
    }

    pub fn local_nodes(&self, worker: usize) -> NodeSet {
        NodeSet::from_sorted(
            (0..self.owner.len() as NodeId)
                .filter(|&i| self.is_local(i, worker))
                .collect(),
        )
    }

    /// Locality flag for every candidate, in candidate order.
    pub fn locality(&self, candidates: &NodeSet, worker: usize) -> Vec<bool> {
        candidates
            .iter()
            .map(|j| self.is_local(j, worker))
            .collect()
    }

    /// Splits `candidates` into the nodes owned by `worker` and the rest.
    pub fn split_local_remote(&self, candidates: &NodeSet, worker: usize) -> (NodeSet, NodeSet) {
        let (local, remote): (Vec<NodeId>, Vec<NodeId>) =
            candidates.iter().partition(|&j| self.is_local(j, worker));
        (NodeSet::from_sorted(local), NodeSet::from_sorted(remote))
    }
}
