//! Run configuration: defaults, overridden by a TOML file, overridden by flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::features::{DatasetMode, DistanceConfig};
use crate::maxent::TrainConfig;
use crate::partition::PruneConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InferenceModel {
    #[default]
    Evidential,
    Merging,
    Greedy,
    Uniform,
}

impl InferenceModel {
    pub const ALL: [InferenceModel; 4] =
        [InferenceModel::Uniform, InferenceModel::Greedy, InferenceModel::Merging, InferenceModel::Evidential];

    pub fn name(self) -> &'static str {
        match self {
            InferenceModel::Evidential => "evidential",
            InferenceModel::Merging => "merging",
            InferenceModel::Greedy => "greedy",
            InferenceModel::Uniform => "uniform",
        }
    }

    /// Whether the model needs pairwise probabilities.
    pub fn uses_pairs(self) -> bool {
        matches!(self, InferenceModel::Evidential | InferenceModel::Merging)
    }
}

impl fmt::Display for InferenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InferenceModel {
    type Err = CorefError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evidential" => Ok(InferenceModel::Evidential),
            "merging" | "merging_decision" | "merging-decision" => Ok(InferenceModel::Merging),
            "greedy" => Ok(InferenceModel::Greedy),
            "uniform" => Ok(InferenceModel::Uniform),
            other => Err(CorefError::Config(format!("unknown inference model {other:?}"))),
        }
    }
}

impl FromStr for DatasetMode {
    type Err = CorefError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_pairs" | "all-pairs" => Ok(DatasetMode::AllPairs),
            "merge_decisions" | "merge-decisions" => Ok(DatasetMode::MergeDecisions),
            other => Err(CorefError::Config(format!("unknown dataset mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub distance_thresholds: [u64; 4],
    pub train: TrainConfig,
    pub prune: PruneConfig,
    /// Configurations below this probability are pooled into the remainder.
    pub epsilon: f64,
    pub inference: InferenceModel,
    pub dataset_mode: DatasetMode,
    pub seed: u64,
    /// Fraction of a corpus used for training when it is split.
    pub train_fraction: f64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            distance_thresholds: DistanceConfig::default().thresholds,
            train: TrainConfig::default(),
            prune: PruneConfig::default(),
            epsilon: 0.01,
            inference: InferenceModel::default(),
            dataset_mode: DatasetMode::default(),
            seed: 0,
            train_fraction: 0.7,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CorefError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => RunConfig::from_toml(&crate::io::read(p)?),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn distance_config(&self) -> DistanceConfig {
        DistanceConfig { thresholds: self.distance_thresholds }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CorefError::Config(m));
        self.distance_config().validate()?;
        let t = &self.train;
        if t.tol.is_nan() || t.tol <= 0.0 {
            return err(format!("train.tol must be positive, got {}", t.tol));
        }
        if t.gain_threshold.is_nan() || t.gain_threshold <= 0.0 {
            return err(format!("train.gain_threshold must be positive, got {}", t.gain_threshold));
        }
        if t.max_iters == 0 {
            return err("train.max_iters must be positive".into());
        }
        let p = &self.prune;
        if !(p.floor > 0.0 && p.floor < 1.0) {
            return err(format!("prune.floor must lie in (0, 1), got {}", p.floor));
        }
        if p.cap < 2 {
            return err(format!("prune.cap must be at least 2, got {}", p.cap));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return err(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return err(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        self.synth.validate()
    }
}
