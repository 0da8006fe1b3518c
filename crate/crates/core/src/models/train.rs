use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{math, Architecture, LabelMode, Model};
use crate::data::{FeatureVector, LabeledDataset};
use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            label_mode: LabelMode::Soft,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

fn check_targets(targets: &[Vec<f64>], num_classes: usize, mode: LabelMode) -> Result<()> {
    for t in targets {
        if t.len() != num_classes {
            return Err(Error::DimensionMismatch {
                expected: num_classes,
                actual: t.len(),
            });
        }
        math::validate_distribution(t)?;
        if mode == LabelMode::Hard && !t.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::InvalidDistribution("hard-label target is not one-hot".into()));
        }
    }
    Ok(())
}

fn init(arch: Architecture, input_dim: usize, num_classes: usize, rng: &mut rng::LabRng) -> Result<Model> {
    let mut model = Model::zeros(arch, input_dim, num_classes)?;
    if let Architecture::Mlp { hidden_dim: h } = arch {
        let s1 = (6.0 / (input_dim + h) as f64).sqrt();
        let s2 = (6.0 / (h + num_classes) as f64).sqrt();
        let p = model.params_mut();
        for w in &mut p[..h * input_dim] {
            *w = rng.random_range(-s1..s1);
        }
        let w2_start = h * input_dim + h;
        for w in &mut p[w2_start..w2_start + num_classes * h] {
            *w = rng.random_range(-s2..s2);
        }
    }
    Ok(model)
}

/// Mini-batch SGD on mean cross-entropy against `targets`.
///
/// Linear models start from zero; MLP weights start Glorot-uniform from the
/// seeded stream, biases at zero. Each epoch reshuffles the example order.
pub fn train(
    arch: Architecture,
    input_dim: usize,
    num_classes: usize,
    inputs: &[FeatureVector],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<Model> {
    cfg.validate()?;
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    if inputs.is_empty() && cfg.epochs > 0 {
        return Err(Error::Empty("training data"));
    }
    if let Some(x) = inputs.iter().find(|x| x.dim() != input_dim) {
        return Err(Error::DimensionMismatch {
            expected: input_dim,
            actual: x.dim(),
        });
    }
    check_targets(targets, num_classes, cfg.label_mode)?;

    let mut rng = rng::seeded(cfg.seed);
    let mut model = init(arch, input_dim, num_classes, &mut rng)?;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&FeatureVector> = batch.iter().map(|&i| &inputs[i]).collect();
            let ts: Vec<&[f64]> = batch.iter().map(|&i| targets[i].as_slice()).collect();
            let (_, grad) = model.loss_and_gradient(&xs, &ts)?;
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(model)
}

/// Full-data mean cross-entropy.
pub fn mean_loss(model: &Model, inputs: &[FeatureVector], targets: &[Vec<f64>]) -> Result<f64> {
    let xs: Vec<&FeatureVector> = inputs.iter().collect();
    let ts: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    Ok(model.loss_and_gradient(&xs, &ts)?.0)
}

pub fn accuracy(model: &Model, ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut correct = 0usize;
    for (x, &y) in ds.inputs().iter().zip(ds.labels()) {
        if model.predict(x)?.hard == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}
