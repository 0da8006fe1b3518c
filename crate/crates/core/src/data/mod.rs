//! Datasets, featurization, synthetic domain-shift generators and splits.

mod csv_io;
mod featurize;
mod generate;
mod split;

pub use csv_io::{read_feature_csv, read_text_csv, write_feature_csv, write_text_csv, TextRecord};
pub use featurize::{featurize, fnv1a_64, tokenize, FeaturizerConfig};
pub use generate::{generate_gaussian_pair, generate_tabular_pair, GaussianDomainSpec, TabularDomainSpec};
pub use split::{split, Split};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense real-valued input vector. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("feature vector must have dim >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "feature vector dim must be positive");
        Self(vec![0.0; dim])
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Inputs paired with oracle labels, tagged with the domain they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    inputs: Vec<FeatureVector>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
    domain_tag: String,
}

impl LabeledDataset {
    pub fn new(
        inputs: Vec<FeatureVector>,
        labels: Vec<usize>,
        dim: usize,
        num_classes: usize,
        domain_tag: impl Into<String>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(invalid("num_classes must be positive"));
        }
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        if inputs.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: labels.len(),
            });
        }
        if let Some(x) = inputs.iter().find(|x| x.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.dim(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(invalid(format!("label {y} out of range for {num_classes} classes")));
        }
        Ok(Self {
            inputs,
            labels,
            dim,
            num_classes,
            domain_tag: domain_tag.into(),
        })
    }

    pub fn inputs(&self) -> &[FeatureVector] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Subset by index list, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            num_classes: self.num_classes,
            domain_tag: self.domain_tag.clone(),
        }
    }

    /// The `index`-th of `count` contiguous, disjoint shards (remainder spread over the first shards).
    pub fn shard(&self, index: usize, count: usize) -> Result<Self> {
        if count == 0 || index >= count {
            return Err(invalid(format!("shard {index} of {count} is out of range")));
        }
        let n = self.len();
        let base = n / count;
        let extra = n % count;
        let start = index * base + index.min(extra);
        let len = base + usize::from(index < extra);
        let idx: Vec<usize> = (start..start + len).collect();
        Ok(self.select(&idx))
    }

    /// One-hot encoding of every label.
    pub fn one_hot_targets(&self) -> Vec<Vec<f64>> {
        self.labels
            .iter()
            .map(|&y| crate::models::one_hot(self.num_classes, y))
            .collect()
    }
}
