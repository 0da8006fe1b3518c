use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

const SIMPLEX_TOL: f64 = 1e-12;

/// Finite input support with known source/target cell masses and a per-cell oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDomainSpec {
    pub support_size: usize,
    pub p_source: Vec<f64>,
    pub p_target: Vec<f64>,
    pub oracle_rule: Vec<usize>,
    pub n_source: usize,
    pub n_target: usize,
    pub num_classes: usize,
}

impl TabularDomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.support_size == 0 {
            return bad("support_size must be positive".into());
        }
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        for (name, p) in [("p_source", &self.p_source), ("p_target", &self.p_target)] {
            if p.len() != self.support_size {
                return bad(format!("{name} has {} cells, expected {}", p.len(), self.support_size));
            }
            if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return bad(format!("{name} has a negative or non-finite entry"));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return bad(format!("{name} sums to {sum}"));
            }
        }
        if self.oracle_rule.len() != self.support_size {
            return bad("oracle_rule must cover every cell".into());
        }
        if self.oracle_rule.iter().any(|&c| c >= self.num_classes) {
            return bad("oracle_rule assigns a class >= num_classes".into());
        }
        Ok(())
    }

    /// Every support cell as a one-hot input, in cell order.
    pub fn support_inputs(&self) -> Vec<FeatureVector> {
        (0..self.support_size)
            .map(|i| FeatureVector::one_hot(self.support_size, i))
            .collect()
    }

    fn sample(&self, p: &[f64], n: usize, seed: u64, tag: &str) -> Result<LabeledDataset> {
        let mut inputs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        if n > 0 {
            let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let mut rng = rng::seeded(seed);
            for _ in 0..n {
                let cell = dist.sample(&mut rng);
                inputs.push(FeatureVector::one_hot(self.support_size, cell));
                labels.push(self.oracle_rule[cell]);
            }
        }
        LabeledDataset::new(inputs, labels, self.support_size, self.num_classes, tag)
    }
}

/// Draw source and target datasets. Both draws start from the same seeded stream,
/// so equal distributions and sizes yield identical datasets.
pub fn generate_tabular_pair(
    spec: &TabularDomainSpec,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let source = spec.sample(&spec.p_source, spec.n_source, seed, "source")?;
    let target = spec.sample(&spec.p_target, spec.n_target, seed, "target")?;
    Ok((source, target))
}

/// Isotropic Gaussian class clusters whose means move between domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDomainSpec {
    pub dim: usize,
    pub num_classes: usize,
    pub class_means_source: Vec<Vec<f64>>,
    pub class_means_target: Vec<Vec<f64>>,
    pub noise_std: f64,
    #[serde(default)]
    pub label_noise_rate: f64,
    pub n_source: usize,
    pub n_target: usize,
}

impl GaussianDomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("num_classes must be >= 2".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad(format!("noise_std must be positive, got {}", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.label_noise_rate) {
            return bad(format!("label_noise_rate must be in [0,1), got {}", self.label_noise_rate));
        }
        for (name, means) in [
            ("class_means_source", &self.class_means_source),
            ("class_means_target", &self.class_means_target),
        ] {
            if means.len() != self.num_classes {
                return bad(format!("{name} has {} classes, expected {}", means.len(), self.num_classes));
            }
            if means.iter().any(|m| m.len() != self.dim) {
                return bad(format!("{name} has a mean vector of wrong length"));
            }
            if means.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("{name} has a non-finite entry"));
            }
        }
        Ok(())
    }

    fn sample(&self, means: &[Vec<f64>], n: usize, rng: &mut rng::LabRng, tag: &str) -> Result<LabeledDataset> {
        let noise = Normal::new(0.0, self.noise_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let mut inputs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let class = rng.random_range(0..self.num_classes);
            let x: Vec<f64> = means[class].iter().map(|m| m + noise.sample(rng)).collect();
            let label = if self.label_noise_rate > 0.0 && rng.random::<f64>() < self.label_noise_rate {
                // uniform over the other classes
                let shift = rng.random_range(1..self.num_classes);
                (class + shift) % self.num_classes
            } else {
                class
            };
            inputs.push(FeatureVector::new(x)?);
            labels.push(label);
        }
        LabeledDataset::new(inputs, labels, self.dim, self.num_classes, tag)
    }
}

pub fn generate_gaussian_pair(
    spec: &GaussianDomainSpec,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let source = spec.sample(&spec.class_means_source, spec.n_source, &mut rng::stream(seed, 0), "source")?;
    let target = spec.sample(&spec.class_means_target, spec.n_target, &mut rng::stream(seed, 1), "target")?;
    Ok((source, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4(n: usize) -> TabularDomainSpec {
        TabularDomainSpec {
            support_size: 4,
            p_source: vec![0.25; 4],
            p_target: vec![0.25; 4],
            oracle_rule: vec![0, 1, 0, 1],
            n_source: n,
            n_target: n,
            num_classes: 2,
        }
    }

    fn cell_of(x: &FeatureVector) -> usize {
        x.values().iter().position(|&v| v == 1.0).unwrap()
    }

    #[test]
    fn empty_source_is_valid() {
        let mut spec = uniform4(10);
        spec.n_source = 0;
        let (s, t) = generate_tabular_pair(&spec, 7).unwrap();
        assert!(s.is_empty());
        assert_eq!(t.len(), 10);
    }

    #[test]
    fn equal_distributions_same_stream_identical() {
        let spec = uniform4(500);
        let (s, t) = generate_tabular_pair(&spec, 3).unwrap();
        assert_eq!(s.inputs(), t.inputs());
        assert_eq!(s.labels(), t.labels());
    }

    #[test]
    fn empirical_frequencies_converge() {
        let spec = uniform4(100_000);
        for seed in [0, 1, 2] {
            let (s, _) = generate_tabular_pair(&spec, seed).unwrap();
            let mut counts = [0usize; 4];
            for x in s.inputs() {
                counts[cell_of(x)] += 1;
            }
            for c in counts {
                assert!((c as f64 / 100_000.0 - 0.25).abs() <= 0.01);
            }
        }
    }

    #[test]
    fn labels_follow_oracle_rule() {
        let spec = uniform4(200);
        let (s, _) = generate_tabular_pair(&spec, 11).unwrap();
        for (x, &y) in s.inputs().iter().zip(s.labels()) {
            assert_eq!(spec.oracle_rule[cell_of(x)], y);
        }
    }

    #[test]
    fn rejects_bad_tabular_spec() {
        let mut spec = uniform4(10);
        spec.p_source = vec![0.5, 0.5, 0.5, -0.5];
        assert!(generate_tabular_pair(&spec, 0).is_err());
        let mut spec = uniform4(10);
        spec.p_target = vec![0.3; 4];
        assert!(generate_tabular_pair(&spec, 0).is_err());
        let mut spec = uniform4(10);
        spec.oracle_rule[2] = 5;
        assert!(generate_tabular_pair(&spec, 0).is_err());
    }

    fn gauss(n: usize) -> GaussianDomainSpec {
        GaussianDomainSpec {
            dim: 2,
            num_classes: 2,
            class_means_source: vec![vec![-5.0, 0.0], vec![5.0, 0.0]],
            class_means_target: vec![vec![-5.0, 1.0], vec![5.0, 1.0]],
            noise_std: 1.0,
            label_noise_rate: 0.0,
            n_source: n,
            n_target: n,
        }
    }

    #[test]
    fn gaussian_single_example() {
        let mut spec = gauss(5);
        spec.n_source = 1;
        let (s, t) = generate_gaussian_pair(&spec, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn gaussian_deterministic() {
        let spec = gauss(50);
        assert_eq!(generate_gaussian_pair(&spec, 9).unwrap(), generate_gaussian_pair(&spec, 9).unwrap());
        assert_ne!(generate_gaussian_pair(&spec, 9).unwrap(), generate_gaussian_pair(&spec, 10).unwrap());
    }

    #[test]
    fn gaussian_rejects_bad_noise() {
        let mut spec = gauss(5);
        spec.noise_std = 0.0;
        assert!(matches!(generate_gaussian_pair(&spec, 0), Err(Error::InvalidSpec(_))));
        spec.noise_std = -1.0;
        assert!(generate_gaussian_pair(&spec, 0).is_err());
    }

    #[test]
    fn label_noise_flips_to_other_class() {
        let mut spec = gauss(4000);
        spec.num_classes = 3;
        spec.class_means_source.push(vec![0.0, 50.0]);
        spec.class_means_target.push(vec![0.0, 50.0]);
        spec.label_noise_rate = 0.3;
        let (s, _) = generate_gaussian_pair(&spec, 5).unwrap();
        // class is recoverable from the mean since clusters are far apart
        let true_class = |x: &FeatureVector| {
            let v = x.values();
            if v[1] > 25.0 {
                2
            } else if v[0] < 0.0 {
                0
            } else {
                1
            }
        };
        let flips = s.inputs().iter().zip(s.labels()).filter(|(x, &y)| true_class(x) != y).count();
        let rate = flips as f64 / s.len() as f64;
        assert!((rate - 0.3).abs() < 0.03, "flip rate {rate}");
    }
}
