use crate::attacker::HarvestResult;
use crate::data::{FeatureVector, LabeledDataset, TabularDomainSpec};
use crate::error::{invalid, Error, Result};
use crate::models::{one_hot, LabelMode, Model};
use crate::victim::{half_l1, ApiResponse};

/// Anything that assigns a class distribution to each evaluation input.
///
/// Endpoints enter as the `Responses` they returned, so evaluating a risk
/// never issues (or bills) a fresh query.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Model(&'a Model),
    /// Oracle labels, encoded one-hot.
    Labels { labels: &'a [usize], num_classes: usize },
    Responses(&'a [ApiResponse]),
    Distributions(&'a [Vec<f64>]),
}

impl Source<'_> {
    fn outputs(&self, inputs: &[FeatureVector]) -> Result<Vec<(Vec<f64>, usize)>> {
        let check_len = |len: usize| {
            if len == inputs.len() {
                Ok(())
            } else {
                Err(Error::LengthMismatch {
                    left: len,
                    right: inputs.len(),
                })
            }
        };
        match *self {
            Source::Model(m) => inputs
                .iter()
                .map(|x| m.predict(x).map(|p| (p.probs, p.hard)))
                .collect(),
            Source::Labels { labels, num_classes } => {
                check_len(labels.len())?;
                labels
                    .iter()
                    .map(|&y| {
                        if y >= num_classes {
                            Err(invalid(format!("label {y} out of range")))
                        } else {
                            Ok((one_hot(num_classes, y), y))
                        }
                    })
                    .collect()
            }
            Source::Responses(rs) => {
                check_len(rs.len())?;
                Ok(rs.iter().map(|r| (r.probs.clone(), r.hard)).collect())
            }
            Source::Distributions(ds) => {
                check_len(ds.len())?;
                Ok(ds.iter().map(|d| (d.clone(), crate::models::argmax(d))).collect())
            }
        }
    }
}

/// Evaluation inputs with optional probability weights (uniform when absent).
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub inputs: &'a [FeatureVector],
    pub weights: Option<&'a [f64]>,
}

impl<'a> EvalSet<'a> {
    pub fn uniform(inputs: &'a [FeatureVector]) -> Self {
        Self { inputs, weights: None }
    }

    pub fn weighted(inputs: &'a [FeatureVector], weights: &'a [f64]) -> Self {
        Self {
            inputs,
            weights: Some(weights),
        }
    }

    fn expectation(&self, values: &[f64]) -> Result<f64> {
        match self.weights {
            None => Ok(values.iter().sum::<f64>() / values.len() as f64),
            Some(w) => {
                if w.len() != values.len() {
                    return Err(Error::LengthMismatch {
                        left: w.len(),
                        right: values.len(),
                    });
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDistribution("evaluation weights".into()));
                }
                Ok(w.iter().zip(values).map(|(a, b)| a * b).sum())
            }
        }
    }
}

/// A domain with oracle labels: a labeled sample, or an exactly weighted support.
#[derive(Debug, Clone, Copy)]
pub struct Domain<'a> {
    pub eval: EvalSet<'a>,
    pub labels: &'a [usize],
    pub num_classes: usize,
}

impl<'a> Domain<'a> {
    pub fn from_dataset(ds: &'a LabeledDataset) -> Self {
        Self {
            eval: EvalSet::uniform(ds.inputs()),
            labels: ds.labels(),
            num_classes: ds.num_classes(),
        }
    }

    pub fn oracle(&self) -> Source<'a> {
        Source::Labels {
            labels: self.labels,
            num_classes: self.num_classes,
        }
    }
}

/// Every cell of a tabular support, for exact (enumerated) expectations.
#[derive(Debug, Clone)]
pub struct TabularSupport {
    pub inputs: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub p_source: Vec<f64>,
    pub p_target: Vec<f64>,
    pub num_classes: usize,
}

impl TabularSupport {
    pub fn new(spec: &TabularDomainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            inputs: spec.support_inputs(),
            labels: spec.oracle_rule.clone(),
            p_source: spec.p_source.clone(),
            p_target: spec.p_target.clone(),
            num_classes: spec.num_classes,
        })
    }

    pub fn source(&self) -> Domain<'_> {
        Domain {
            eval: EvalSet::weighted(&self.inputs, &self.p_source),
            labels: &self.labels,
            num_classes: self.num_classes,
        }
    }

    pub fn target(&self) -> Domain<'_> {
        Domain {
            eval: EvalSet::weighted(&self.inputs, &self.p_target),
            labels: &self.labels,
            num_classes: self.num_classes,
        }
    }
}

/// Expected disagreement between two prediction sources.
///
/// Hard mode counts argmax mismatches; soft mode averages the half-L1 distance
/// between the two output distributions. Both lie in `[0, 1]`.
pub fn disagreement_risk(f: &Source, g: &Source, eval: &EvalSet, mode: LabelMode) -> Result<f64> {
    if eval.inputs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let a = f.outputs(eval.inputs)?;
    let b = g.outputs(eval.inputs)?;
    let per_example = a
        .iter()
        .zip(&b)
        .map(|((pa, ha), (pb, hb))| {
            if pa.len() != pb.len() {
                return Err(Error::DimensionMismatch {
                    expected: pa.len(),
                    actual: pb.len(),
                });
            }
            Ok(match mode {
                LabelMode::Hard => f64::from(u8::from(ha != hb)),
                LabelMode::Soft => half_l1(pa, pb),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    eval.expectation(&per_example)
}

/// Mean pairwise disagreement between the harvested victims.
pub fn ensemble_diversity(h: &HarvestResult, mode: LabelMode) -> Result<f64> {
    let k = h.num_victims();
    if k < 2 {
        return Err(invalid("diversity needs at least two victims"));
    }
    let eval = EvalSet::uniform(&h.inputs);
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            total += disagreement_risk(&Source::Responses(&h.responses[i]), &Source::Responses(&h.responses[j]), &eval, mode)?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
