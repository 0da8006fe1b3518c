use rand::seq::SliceRandom;

use crate::data::{FeatureVector, TabularDomainSpec};
use crate::error::{Error, Result};
use crate::models::{one_hot, train, Architecture, LabelMode, TrainConfig};
use crate::rng;

/// Half-L1 distance between two distributions over the same cells.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    crate::models::validate_distribution(p)?;
    crate::models::validate_distribution(q)?;
    Ok(crate::victim::half_l1(p, q).min(1.0))
}

pub fn tv_exact(spec: &TabularDomainSpec) -> Result<f64> {
    spec.validate()?;
    tv_distance(&spec.p_source, &spec.p_target)
}

const MIN_DOMAIN_SIZE: usize = 4;

/// Domain-classifier estimate of total variation.
///
/// Each domain is shuffled and halved; a linear classifier learns to tell the
/// domains apart on the first halves, and its balanced held-out accuracy `a`
/// gives `max(0, 2a - 1)`. The result tends to under-estimate the true distance.
pub fn tv_discriminator(source: &[FeatureVector], target: &[FeatureVector], cfg: &TrainConfig) -> Result<f64> {
    if source.len() < MIN_DOMAIN_SIZE || target.len() < MIN_DOMAIN_SIZE {
        return Err(crate::error::invalid(format!(
            "each domain needs at least {MIN_DOMAIN_SIZE} examples"
        )));
    }
    let dim = source[0].dim();
    let mut rng = rng::stream(cfg.seed, 7);
    let mut halves = Vec::with_capacity(2);
    for domain in [source, target] {
        let mut idx: Vec<usize> = (0..domain.len()).collect();
        idx.shuffle(&mut rng);
        let cut = domain.len() / 2;
        halves.push((idx[..cut].to_vec(), idx[cut..].to_vec()));
    }

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (label, (domain, (train_idx, _))) in [source, target].iter().zip(&halves).enumerate() {
        for &i in train_idx {
            inputs.push(domain[i].clone());
            targets.push(one_hot(2, label));
        }
    }
    let cfg = TrainConfig {
        label_mode: LabelMode::Hard,
        ..*cfg
    };
    let model = train(Architecture::Linear, dim, 2, &inputs, &targets, &cfg)?;

    let mut recall = [0.0; 2];
    for (label, (domain, (_, held_idx))) in [source, target].iter().zip(&halves).enumerate() {
        let mut hits = 0usize;
        for &i in held_idx {
            if model.predict(&domain[i])?.hard == label {
                hits += 1;
            }
        }
        recall[label] = hits as f64 / held_idx.len() as f64;
    }
    let balanced = 0.5 * (recall[0] + recall[1]);
    Ok((2.0 * balanced - 1.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: Vec<f64>, q: Vec<f64>) -> TabularDomainSpec {
        let m = p.len();
        TabularDomainSpec {
            support_size: m,
            p_source: p,
            p_target: q,
            oracle_rule: vec![0; m],
            n_source: 10,
            n_target: 10,
            num_classes: 2,
        }
    }

    #[test]
    fn identical_is_zero() {
        assert_eq!(tv_exact(&spec(vec![0.2, 0.8], vec![0.2, 0.8])).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_is_one() {
        assert_eq!(tv_exact(&spec(vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.3, 0.7])).unwrap(), 1.0);
    }

    #[test]
    fn hand_enumerated() {
        // (|0.5-0.8| + |0.5-0.2|) / 2
        assert!((tv_exact(&spec(vec![0.5, 0.5], vec![0.8, 0.2])).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn symmetric() {
        let a = spec(vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2]);
        let b = spec(a.p_target.clone(), a.p_source.clone());
        assert_eq!(tv_exact(&a).unwrap(), tv_exact(&b).unwrap());
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(tv_exact(&spec(vec![0.5, 0.6], vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn discriminator_needs_four_examples() {
        let xs = vec![FeatureVector::zeros(2); 3];
        let ys = vec![FeatureVector::zeros(2); 10];
        assert!(tv_discriminator(&xs, &ys, &TrainConfig::default()).is_err());
    }

    #[test]
    fn discriminator_disjoint_supports() {
        let src: Vec<_> = (0..200).map(|i| FeatureVector::one_hot(6, i % 3)).collect();
        let tgt: Vec<_> = (0..200).map(|i| FeatureVector::one_hot(6, 3 + i % 3)).collect();
        assert!(tv_discriminator(&src, &tgt, &TrainConfig::default()).unwrap() >= 0.95);
    }
}
