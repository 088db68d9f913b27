//! Communication-efficient neighbor sampling for distributed GCN training.
//!
//! The crate simulates `K` workers that each own a slice of a graph and train
//! a GCN with layer-wise (LADIES-style) or subgraph (GraphSAINT-style)
//! sampling. Fetching the feature vector of a node owned by another worker is
//! the unit of communication. Skewed linear weighted sampling multiplies the
//! sampling weight of every local candidate by a factor `s`, chosen so the
//! variance of the aggregation estimate stays within a constant factor of
//! plain linear weighted sampling while far fewer remote nodes are drawn.
//!
//! Modules, bottom up:
//!
//! - [`graph`]: CSR storage, symmetric normalization, neighbor queries.
//! - [`partition`]: node ownership and the local/remote split.
//! - [`sampling`]: linear and skewed distributions, scale factor, draws.
//! - [`estimation`]: unbiased aggregation estimate and variance bounds.
//! - [`training`]: sample plans, a manual-gradient GCN, simulated workers.
//! - [`harness`]: configuration, synthetic data, experiment runner.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use estimation::{
    empirical_variance, estimate_aggregate, full_aggregate, variance_bound_linear,
    variance_bound_skewed, VarianceParams,
};
pub use graph::{Masks, NodeId, NodeSet, Split, WeightedGraph};
pub use linalg::Matrix;
pub use partition::{partition_nodes, Partition, PartitionStrategy};
pub use sampling::{
    draw_sample, exact_scale_upper_bound, expected_remote_count, inclusion_probability,
    linear_weights, skew_scale, skewed_weights, ProbDist, SampleDraw, SamplerConfig, SamplingMode,
};
pub use training::{
    evaluate, forward, ladies_plan, loss_and_backward, saint_plan, train_distributed, CommLedger,
    EvalScore, GcnModel, Metrics, SamplePlan, TrainConfig,
};
