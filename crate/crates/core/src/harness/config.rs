//! Experiment configuration, read from TOML.
//!
//! Top-level keys: `data`, `victims`, `attacker`, `evaluation`,
//! `human_price_per_label`. See `configs/` for complete examples.

use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::attacker::Strategy;
use crate::data::{FeaturizerConfig, GaussianDomainSpec, TabularDomainSpec};
use crate::error::{invalid, Error, Result};
use crate::models::{Architecture, LabelMode, TrainConfig};
use crate::victim::DefensePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub source: (f64, f64, f64),
    pub target: (f64, f64, f64),
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            source: (0.8, 0.1, 0.1),
            target: (0.5, 0.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Gaussian {
        spec: GaussianDomainSpec,
        #[serde(default)]
        splits: SplitFractions,
    },
    Tabular {
        spec: TabularDomainSpec,
        #[serde(default)]
        splits: SplitFractions,
    },
    /// `text,label` files, featurized with the hashing featurizer.
    Csv {
        source: PathBuf,
        target: PathBuf,
        num_classes: usize,
        #[serde(default)]
        featurizer: FeaturizerConfig,
        #[serde(default)]
        splits: SplitFractions,
    },
}

impl DataConfig {
    pub fn splits(&self) -> SplitFractions {
        match self {
            DataConfig::Gaussian { splits, .. } | DataConfig::Tabular { splits, .. } | DataConfig::Csv { splits, .. } => *splits,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            DataConfig::Gaussian { spec, .. } => spec.num_classes,
            DataConfig::Tabular { spec, .. } => spec.num_classes,
            DataConfig::Csv { num_classes, .. } => *num_classes,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DataConfig::Gaussian { spec, .. } => spec.dim,
            DataConfig::Tabular { spec, .. } => spec.support_size,
            DataConfig::Csv { featurizer, .. } => featurizer.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub hidden_dim: usize,
}

pub fn architecture(kind: ModelKind, dims: ModelDims) -> Result<Architecture> {
    match kind {
        ModelKind::Linear => Ok(Architecture::Linear),
        ModelKind::Mlp if dims.hidden_dim > 0 => Ok(Architecture::Mlp {
            hidden_dim: dims.hidden_dim,
        }),
        ModelKind::Mlp => Err(invalid("mlp needs dims.hidden_dim > 0")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shard {
    pub index: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VictimConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: ModelKind,
    #[serde(default)]
    pub dims: ModelDims,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub defense: DefensePolicy,
    #[serde(default)]
    pub price_per_query: Decimal,
    /// Train on one contiguous shard of the source training split.
    #[serde(default)]
    pub shard: Option<Shard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub dims: ModelDims,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub label_mode: LabelMode,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Risks,
    Bound,
    Diversity,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    /// Train a reference model on target oracle labels (upper-bound row only).
    #[serde(default)]
    pub in_domain: bool,
    /// Mode for every reported risk; accuracy always uses argmax labels.
    #[serde(default = "hard")]
    pub risk_mode: LabelMode,
    #[serde(default)]
    pub parallel: bool,
}

fn hard() -> LabelMode {
    LabelMode::Hard
}

fn all_metrics() -> Vec<Metric> {
    vec![Metric::Accuracy, Metric::Risks, Metric::Bound, Metric::Diversity, Metric::Cost]
}

impl EvaluationConfig {
    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub victims: Vec<VictimConfig>,
    pub attacker: AttackerConfig,
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub human_price_per_label: Decimal,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and resolve relative CSV paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let DataConfig::Csv { source, target, .. } = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [source, target] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.victims.is_empty() {
            return bad("at least one victim is required".into());
        }
        if self.evaluation.seeds.is_empty() {
            return bad("evaluation.seeds must not be empty".into());
        }
        match &self.data {
            DataConfig::Gaussian { spec, .. } => spec.validate()?,
            DataConfig::Tabular { spec, .. } => spec.validate()?,
            DataConfig::Csv { num_classes, featurizer, .. } => {
                if *num_classes == 0 {
                    return bad("data.num_classes must be positive".into());
                }
                if featurizer.dim < 2 {
                    return bad("data.featurizer.dim must be >= 2".into());
                }
            }
        }
        for (k, v) in self.victims.iter().enumerate() {
            architecture(v.kind, v.dims).map_err(|e| Error::InvalidSpec(format!("victim {k}: {e}")))?;
            v.train.validate().map_err(|e| Error::InvalidSpec(format!("victim {k}: {e}")))?;
            v.defense.validate().map_err(|e| Error::InvalidSpec(format!("victim {k}: {e}")))?;
            if v.price_per_query < Decimal::ZERO {
                return bad(format!("victim {k}: negative price_per_query"));
            }
            if let Some(s) = v.shard {
                if s.count == 0 || s.index >= s.count {
                    return bad(format!("victim {k}: shard {} of {} is out of range", s.index, s.count));
                }
            }
        }
        let a = &self.attacker;
        architecture(a.kind, a.dims).map_err(|e| Error::InvalidSpec(format!("attacker: {e}")))?;
        a.train.validate().map_err(|e| Error::InvalidSpec(format!("attacker: {e}")))?;
        match a.strategy {
            Strategy::Single(k) if k >= self.victims.len() => {
                return bad(format!("attacker.strategy single:{k} but only {} victims", self.victims.len()));
            }
            Strategy::Average if a.label_mode == LabelMode::Hard => {
                return bad("attacker.strategy average requires label_mode soft".into());
            }
            _ => {}
        }
        if self.human_price_per_label < Decimal::ZERO {
            return bad("human_price_per_label must be non-negative".into());
        }
        Ok(())
    }
}
