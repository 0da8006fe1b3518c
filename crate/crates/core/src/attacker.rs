//! Label harvesting from victim endpoints and imitation-model training.
//!
//! Nothing here reads victim parameters or oracle labels: the only inputs are
//! the attacker's own unlabeled queries and whatever the endpoints answer.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::error::{invalid, Error, Result};
use crate::models::{one_hot, train, Architecture, LabelMode, Model, TrainConfig};
use crate::victim::{ApiResponse, VictimEndpoint};

/// Responses of K victims on N shared inputs, victim-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestResult {
    pub inputs: Vec<FeatureVector>,
    pub responses: Vec<Vec<ApiResponse>>,
    pub victim_ids: Vec<String>,
}

impl HarvestResult {
    /// Build from pre-recorded responses, checking the grid is rectangular.
    pub fn new(inputs: Vec<FeatureVector>, responses: Vec<Vec<ApiResponse>>, victim_ids: Vec<String>) -> Result<Self> {
        if responses.is_empty() {
            return Err(invalid("harvest needs at least one victim"));
        }
        if victim_ids.len() != responses.len() {
            return Err(Error::LengthMismatch {
                left: victim_ids.len(),
                right: responses.len(),
            });
        }
        if let Some(row) = responses.iter().find(|r| r.len() != inputs.len()) {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: inputs.len(),
            });
        }
        Ok(Self {
            inputs,
            responses,
            victim_ids,
        })
    }

    pub fn num_victims(&self) -> usize {
        self.responses.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_classes(&self) -> usize {
        self.responses[0].first().map_or(0, |r| r.probs.len())
    }
}

/// Query every victim on every input, in input order.
///
/// All dimensions are checked up front, so a mismatch bills nobody.
pub fn harvest(victims: &mut [VictimEndpoint], inputs: &[FeatureVector]) -> Result<HarvestResult> {
    if victims.is_empty() {
        return Err(invalid("harvest needs at least one victim"));
    }
    if inputs.is_empty() {
        return Err(Error::Empty("query inputs"));
    }
    let classes = victims[0].num_classes();
    for v in victims.iter() {
        if v.num_classes() != classes {
            return Err(invalid(format!("victim {} disagrees on the number of classes", v.name())));
        }
        inputs.iter().try_for_each(|x| v.check_input(x))?;
    }
    let mut responses = Vec::with_capacity(victims.len());
    for v in victims.iter_mut() {
        responses.push(v.query_batch(inputs)?);
    }
    HarvestResult::new(
        inputs.to_vec(),
        responses,
        victims.iter().map(|v| v.name().to_string()).collect(),
    )
}

/// Serialized as `single:K`, `concat` or `average`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Single(usize),
    Concat,
    Average,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Single(k) => write!(f, "single:{k}"),
            Strategy::Concat => f.write_str("concat"),
            Strategy::Average => f.write_str("average"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Strategy::Concat),
            "average" => Ok(Strategy::Average),
            _ => s
                .strip_prefix("single:")
                .or_else(|| s.strip_prefix("single(").and_then(|r| r.strip_suffix(')')))
                .and_then(|k| k.parse().ok())
                .map(Strategy::Single)
                .ok_or_else(|| invalid(format!("unknown strategy {s:?} (use concat, average or single:K)"))),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.to_string()
    }
}

/// Training set for the attack model. Carries no oracle labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationDataset {
    pub inputs: Vec<FeatureVector>,
    pub targets: Vec<Vec<f64>>,
    /// Index into the harvest's inputs for every example.
    pub input_ids: Vec<usize>,
    /// Victim that produced each target; `None` for averaged targets.
    pub victim_ids: Vec<Option<usize>>,
    pub provenance: Strategy,
    pub label_mode: LabelMode,
    /// Examples per distinct query: K for concat, 1 otherwise.
    pub copies_per_input: usize,
}

impl ImitationDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Audit export: `input_id,victim_id,target_0..target_{C-1}`. Averaged rows use victim id `avg`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let classes = self.targets.first().map_or(0, Vec::len);
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["input_id".to_string(), "victim_id".to_string()];
        header.extend((0..classes).map(|c| format!("target_{c}")));
        wtr.write_record(&header)?;
        for ((id, victim), target) in self.input_ids.iter().zip(&self.victim_ids).zip(&self.targets) {
            let mut row = vec![id.to_string(), victim.map_or_else(|| "avg".to_string(), |k| k.to_string())];
            row.extend(target.iter().map(|t| t.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn target_of(response: &ApiResponse, mode: LabelMode) -> Vec<f64> {
    match mode {
        LabelMode::Soft => response.probs.clone(),
        LabelMode::Hard => one_hot(response.probs.len(), response.hard),
    }
}

/// Turn harvested responses into an imitation training set.
///
/// `Concat` emits K*N examples ordered victim-major, so the empirical loss is
/// the uniform 1/K mixture over victims. `Average` needs soft scores.
pub fn assemble(h: &HarvestResult, strategy: Strategy, label_mode: LabelMode) -> Result<ImitationDataset> {
    let k = h.num_victims();
    let n = h.num_inputs();
    let (inputs, targets, input_ids, victim_ids) = match strategy {
        Strategy::Single(v) => {
            if v >= k {
                return Err(invalid(format!("victim index {v} out of range for {k} victims")));
            }
            (
                h.inputs.clone(),
                h.responses[v].iter().map(|r| target_of(r, label_mode)).collect(),
                (0..n).collect(),
                vec![Some(v); n],
            )
        }
        Strategy::Concat => {
            let mut inputs = Vec::with_capacity(k * n);
            let mut targets = Vec::with_capacity(k * n);
            let mut ids = Vec::with_capacity(k * n);
            let mut victims = Vec::with_capacity(k * n);
            for (v, row) in h.responses.iter().enumerate() {
                for (i, r) in row.iter().enumerate() {
                    inputs.push(h.inputs[i].clone());
                    targets.push(target_of(r, label_mode));
                    ids.push(i);
                    victims.push(Some(v));
                }
            }
            (inputs, targets, ids, victims)
        }
        Strategy::Average => {
            if label_mode == LabelMode::Hard {
                return Err(invalid("average ensembling needs soft labels"));
            }
            let classes = h.num_classes();
            let targets = (0..n)
                .map(|i| {
                    let mut mean = vec![0.0; classes];
                    for row in &h.responses {
                        for (m, p) in mean.iter_mut().zip(&row[i].probs) {
                            *m += p;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= k as f64);
                    mean
                })
                .collect();
            (h.inputs.clone(), targets, (0..n).collect(), vec![None; n])
        }
    };
    Ok(ImitationDataset {
        inputs,
        targets,
        input_ids,
        victim_ids,
        provenance: strategy,
        label_mode,
        copies_per_input: if strategy == Strategy::Concat { k } else { 1 },
    })
}

/// Train the attack model on retrieved labels only.
///
/// `cfg.batch_size` counts distinct queries: a concat dataset trains with
/// batches of `K * batch_size` examples, so an epoch takes the same number of
/// SGD steps whichever strategy built the dataset.
pub fn imitate(ds: &ImitationDataset, arch: Architecture, cfg: &TrainConfig) -> Result<Model> {
    if ds.is_empty() {
        return Err(Error::Empty("imitation dataset"));
    }
    let input_dim = ds.inputs[0].dim();
    let classes = ds.targets[0].len();
    let cfg = TrainConfig {
        label_mode: ds.label_mode,
        batch_size: cfg.batch_size.saturating_mul(ds.copies_per_input.max(1)),
        ..*cfg
    };
    train(arch, input_dim, classes, &ds.inputs, &ds.targets, &cfg)
}
