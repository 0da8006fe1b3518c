//! Softmax-linear and one-hidden-layer MLP classifiers trained with mini-batch SGD.

mod format;
mod math;
mod train;

pub use format::{deserialize_model, serialize_model, ModelFormatError, FORMAT_VERSION};
pub use math::{argmax, cross_entropy, entropy, one_hot, softmax, validate_distribution};
pub use train::{accuracy, mean_loss, train, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::error::{Error, Result};

/// Whether training targets / API outputs carry full scores or only the predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    #[default]
    Soft,
    Hard,
}

impl std::fmt::Display for LabelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelMode::Soft => "soft",
            LabelMode::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Linear,
    Mlp { hidden_dim: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp { .. } => "mlp",
        }
    }
}

/// Class probabilities plus the argmax class (lowest index wins ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub hard: usize,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let hard = argmax(&probs);
        Self { probs, hard }
    }
}

/// A parametric classifier. Parameters live in one flat vector:
///
/// * linear: `W (C x D)` row-major, then `b (C)`
/// * mlp: `W1 (H x D)`, `b1 (H)`, `W2 (C x H)`, `b2 (C)`; hidden activation is tanh
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    input_dim: usize,
    num_classes: usize,
    params: Vec<f64>,
}

impl Model {
    /// All-zero parameters.
    pub fn zeros(arch: Architecture, input_dim: usize, num_classes: usize) -> Result<Self> {
        let n = Self::param_count(arch, input_dim, num_classes)?;
        Ok(Self {
            arch,
            input_dim,
            num_classes,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(arch: Architecture, input_dim: usize, num_classes: usize, params: Vec<f64>) -> Result<Self> {
        let n = Self::param_count(arch, input_dim, num_classes)?;
        if params.len() != n {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: n,
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            arch,
            input_dim,
            num_classes,
            params,
        })
    }

    pub fn param_count(arch: Architecture, input_dim: usize, num_classes: usize) -> Result<usize> {
        if input_dim == 0 || num_classes == 0 {
            return Err(crate::error::invalid("input_dim and num_classes must be positive"));
        }
        Ok(match arch {
            Architecture::Linear => num_classes * input_dim + num_classes,
            Architecture::Mlp { hidden_dim } => {
                if hidden_dim == 0 {
                    return Err(crate::error::invalid("hidden_dim must be positive"));
                }
                hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes
            }
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-softmax scores. Also returns hidden activations for the MLP.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, c) = (self.input_dim, self.num_classes);
        match self.arch {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(c * d);
                (affine(w, b, x), Vec::new())
            }
            Architecture::Mlp { hidden_dim: h } => {
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let hidden: Vec<f64> = affine(w1, b1, x).into_iter().map(f64::tanh).collect();
                (affine(w2, b2, &hidden), hidden)
            }
        }
    }

    pub fn logits(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_dim(x.values())?;
        Ok(self.forward(x.values()).0)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        let logits = self.logits(x)?;
        Ok(Prediction::from_probs(softmax(&logits)?))
    }

    /// Mean cross-entropy over the batch and its gradient w.r.t. every parameter.
    pub fn loss_and_gradient(&self, inputs: &[&FeatureVector], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let (d, c) = (self.input_dim, self.num_classes);
        let scale = 1.0 / inputs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let x = x.values();
            self.check_dim(x)?;
            if t.len() != c {
                return Err(Error::DimensionMismatch { expected: c, actual: t.len() });
            }
            let (logits, hidden) = self.forward(x);
            let probs = math::softmax_unchecked(&logits);
            loss += math::cross_entropy_unchecked(&probs, t);
            let mass: f64 = t.iter().sum();
            let dz: Vec<f64> = probs.iter().zip(t.iter()).map(|(p, t)| (p * mass - t) * scale).collect();
            match self.arch {
                Architecture::Linear => {
                    let (gw, gb) = grad.split_at_mut(c * d);
                    outer_accumulate(gw, &dz, x);
                    add_assign(gb, &dz);
                }
                Architecture::Mlp { hidden_dim: h } => {
                    let w2 = &self.params[h * d + h..h * d + h + c * h];
                    let (gw1, rest) = grad.split_at_mut(h * d);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(c * h);
                    outer_accumulate(gw2, &dz, &hidden);
                    add_assign(gb2, &dz);
                    let dpre: Vec<f64> = (0..h)
                        .map(|j| {
                            let back: f64 = (0..c).map(|k| w2[k * h + j] * dz[k]).sum();
                            back * (1.0 - hidden[j] * hidden[j])
                        })
                        .collect();
                    outer_accumulate(gw1, &dpre, x);
                    add_assign(gb1, &dpre);
                }
            }
        }
        Ok((loss * scale, grad))
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * x.len()..(r + 1) * x.len()].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

fn outer_accumulate(g: &mut [f64], rows: &[f64], cols: &[f64]) {
    for (r, &rv) in rows.iter().enumerate() {
        if rv == 0.0 {
            continue;
        }
        for (gc, &cv) in g[r * cols.len()..(r + 1) * cols.len()].iter_mut().zip(cols) {
            *gc += rv * cv;
        }
    }
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_uniform_class_zero() {
        let m = Model::zeros(Architecture::Linear, 3, 4).unwrap();
        let p = m.predict(&FeatureVector::new(vec![1.0, -2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(p.probs, vec![0.25; 4]);
        assert_eq!(p.hard, 0);
    }

    #[test]
    fn exact_logit_tie_takes_lowest_index() {
        // class 1 and 2 share the top logit
        let params = vec![0.0, 1.0, 1.0, 0.0, 0.5, 0.5];
        let m = Model::from_params(Architecture::Linear, 1, 3, params).unwrap();
        let p = m.predict(&FeatureVector::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!(p.hard, 1);
    }

    #[test]
    fn predict_rejects_wrong_dim() {
        let m = Model::zeros(Architecture::Mlp { hidden_dim: 2 }, 3, 2).unwrap();
        assert!(matches!(
            m.predict(&FeatureVector::zeros(4)),
            Err(Error::DimensionMismatch { expected: 3, actual: 4 })
        ));
    }

    #[test]
    fn param_counts() {
        assert_eq!(Model::param_count(Architecture::Linear, 4, 3).unwrap(), 15);
        assert_eq!(Model::param_count(Architecture::Mlp { hidden_dim: 5 }, 4, 3).unwrap(), 20 + 5 + 15 + 3);
        assert!(Model::param_count(Architecture::Mlp { hidden_dim: 0 }, 4, 3).is_err());
    }

    #[test]
    fn from_params_rejects_non_finite() {
        assert_eq!(
            Model::from_params(Architecture::Linear, 1, 1, vec![f64::NAN, 0.0]),
            Err(Error::NonFinite)
        );
    }
}
