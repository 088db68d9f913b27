//! TOML experiment configuration. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/sbm"
//!
//! [dataset.sbm]          # or: [dataset] path = "data/cora"
//! n_nodes = 400
//! n_blocks = 4
//! p_in = 0.1
//! p_out = 0.01
//! feature_dim = 8
//! noise = 1.0
//! seed = 1
//!
//! [partition]
//! workers = 4
//! strategy = "contiguous"   # hash | random (with seed) | explicit (with file)
//!
//! [sampler]
//! kind = "ladies"           # or "saint" with subgraph_size
//! budget = 64
//!
//! [model]
//! layers = 3
//! hidden = 32
//!
//! [train]
//! modes = ["full", "local", "skewed"]
//! d_values = [4.0]
//! epochs = 40
//! batch_size = 32
//! lr = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::synth::SbmSpec;
use crate::partition::PartitionStrategy;
use crate::sampling::SamplingMode;
use crate::training::{Optimizer, PlanKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub sampler: SamplerSection,
    pub model: ModelConfig,
    pub train: TrainSection,
}

/// Exactly one of `path` and `sbm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbm: Option<SbmSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Contiguous,
    Hash,
    Random,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub workers: usize,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_strategy() -> StrategyName {
    StrategyName::Contiguous
}

impl PartitionConfig {
    pub fn strategy(&self) -> Result<PartitionStrategy> {
        Ok(match self.strategy {
            StrategyName::Contiguous => PartitionStrategy::Contiguous,
            StrategyName::Hash => PartitionStrategy::Hash,
            StrategyName::Random => PartitionStrategy::Random {
                seed: self
                    .seed
                    .ok_or_else(|| Error::Config("partition.seed is required for random".into()))?,
            },
            StrategyName::Explicit => PartitionStrategy::Explicit {
                file: self.file.clone().ok_or_else(|| {
                    Error::Config("partition.file is required for explicit".into())
                })?,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: PlanKind,
    /// Draws per layer for `ladies`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    /// Subgraph size for `saint`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgraph_size: Option<usize>,
    #[serde(default = "default_clamp")]
    pub clamp_s_min: f64,
}

fn default_clamp() -> f64 {
    1.0
}

impl SamplerSection {
    pub fn draws(&self) -> Result<usize> {
        match self.kind {
            PlanKind::Ladies => self
                .budget
                .ok_or_else(|| Error::Config("sampler.budget is required for ladies".into())),
            PlanKind::Saint => self
                .subgraph_size
                .ok_or_else(|| Error::Config("sampler.subgraph_size is required for saint".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

fn default_layers() -> usize {
    3
}

fn default_hidden() -> usize {
    32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub modes: Vec<SamplingMode>,
    #[serde(default)]
    pub d_values: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerName,
}

fn default_lr() -> f64 {
    0.1
}

fn default_optimizer() -> OptimizerName {
    OptimizerName::Sgd
}

impl TrainSection {
    pub fn optimizer(&self) -> Optimizer {
        match self.optimizer {
            OptimizerName::Sgd => Optimizer::Sgd,
            OptimizerName::Adam => Optimizer::adam(),
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub modes: Option<Vec<SamplingMode>>,
    pub d_values: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(modes) = &o.modes {
            self.train.modes = modes.clone();
        }
        if let Some(d) = &o.d_values {
            self.train.d_values = d.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        match (&self.dataset.path, &self.dataset.sbm) {
            (Some(_), Some(_)) => return bad("dataset: give either path or sbm, not both"),
            (None, None) => return bad("dataset: one of path or sbm is required"),
            (None, Some(spec)) => spec.validate()?,
            _ => {}
        }
        if self.partition.workers == 0 {
            return bad("partition.workers must be at least 1");
        }
        self.partition.strategy()?;
        if self.sampler.draws()? == 0 {
            return bad("sampler budget / subgraph_size must be at least 1");
        }
        if !(self.sampler.clamp_s_min > 0.0) {
            return bad("sampler.clamp_s_min must be positive");
        }
        if self.model.layers == 0 || self.model.hidden == 0 {
            return bad("model.layers and model.hidden must be at least 1");
        }
        let t = &self.train;
        if t.modes.is_empty() {
            return bad("train.modes must not be empty");
        }
        if t.modes.contains(&SamplingMode::Skewed) && t.d_values.is_empty() {
            return bad("train.d_values is required when modes include skewed");
        }
        if t.d_values.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return bad("train.d_values must be positive");
        }
        if t.epochs == 0 || t.batch_size == 0 {
            return bad("train.epochs and train.batch_size must be at least 1");
        }
        if !(t.lr >= 0.0) {
            return bad("train.lr must be nonnegative");
        }
        Ok(())
    }
}
