//! Experiment reports and their JSON/CSV renderings.

use std::io::Write;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::analysis::{BoundStatus, CostReport, DefenseBoundReport, RiskReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Victim,
    /// Trained on target oracle labels; a reference row, not an attack.
    InDomain,
    Attacker,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Victim => "victim",
            Role::InDomain => "in_domain",
            Role::Attacker => "attacker",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvKind {
    Exact,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub role: Role,
    /// Victims are scored on what their endpoint serves.
    pub target_accuracy: f64,
    /// Victims only: the undefended model.
    pub raw_target_accuracy: Option<f64>,
    pub risk: Option<RiskReport>,
    pub cost: Option<CostReport>,
    pub defense_bound: Option<DefenseBoundReport>,
    pub mean_distortion: Option<f64>,
    pub note: Option<String>,
}

/// Queries billed by one endpoint during the attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meters {
    pub victim: String,
    pub query_count: u64,
    #[serde(with = "rust_decimal::serde::float")]
    pub total_cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub error: Option<String>,
    pub tv: Option<f64>,
    pub tv_kind: Option<TvKind>,
    pub diversity: Option<f64>,
    pub meters: Vec<Meters>,
    pub rows: Vec<ModelRow>,
}

impl SeedReport {
    pub fn failed(seed: u64, err: &Error) -> Self {
        Self {
            seed,
            error: Some(err.to_string()),
            tv: None,
            tv_kind: None,
            diversity: None,
            meters: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn row(&self, model: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Mean and sample standard deviation (`None` below two values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub role: Role,
    pub n: usize,
    pub target_accuracy: Stat,
    pub epsilon_v: Option<Stat>,
    pub epsilon_a: Option<Stat>,
    pub imitation_gap: Option<Stat>,
    pub tv: Option<Stat>,
    pub bound_rhs: Option<Stat>,
    /// Seeds where the bound was checked and held, out of those where it was checkable.
    pub bound_holds: Option<(usize, usize)>,
    pub api_cost: Option<Stat>,
    pub human_cost: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Where target accuracy and risks are measured.
    pub evaluated_on: String,
    pub seeds: Vec<SeedReport>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn failed_seeds(&self) -> usize {
        self.seeds.iter().filter(|s| !s.ok()).count()
    }

    pub fn summary_row(&self, model: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.model == model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One row per (seed, model) for every seed that completed.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for s in self.seeds.iter().filter(|s| s.ok()) {
            for r in &s.rows {
                w.write_record(seed_record(s.seed, r))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Same columns; the seed column holds `mean` or `std`, and `bound_holds`
    /// on the mean row counts `held/checked` seeds.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.summary {
            w.write_record(stat_record("mean", r, |s| Some(s.mean)))?;
            w.write_record(stat_record("std", r, |s| s.std))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_summary_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_summary_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "seed",
    "model",
    "role",
    "target_accuracy",
    "epsilon_v",
    "epsilon_a",
    "imitation_gap",
    "tv",
    "bound_rhs",
    "bound_holds",
    "api_cost",
    "human_cost",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn seed_record(seed: u64, r: &ModelRow) -> Vec<String> {
    let risk = r.risk.as_ref();
    vec![
        seed.to_string(),
        r.model.clone(),
        r.role.as_str().into(),
        num(Some(r.target_accuracy)),
        num(risk.map(|x| x.epsilon_v)),
        num(risk.map(|x| x.epsilon_a)),
        num(risk.map(|x| x.imitation_gap)),
        num(risk.map(|x| x.tv)),
        num(risk.map(|x| x.bound_rhs)),
        risk.map(|x| match x.bound_holds {
            BoundStatus::Holds => "true".into(),
            BoundStatus::Violated => "false".into(),
            BoundStatus::NotEvaluable => "not_evaluable".into(),
        })
        .unwrap_or_default(),
        r.cost.map(|c| c.api_cost.to_string()).unwrap_or_default(),
        r.cost.map(|c| c.human_cost.to_string()).unwrap_or_default(),
    ]
}

fn stat_record(label: &str, r: &SummaryRow, pick: impl Fn(&Stat) -> Option<f64>) -> Vec<String> {
    let f = |s: &Option<Stat>| num(s.as_ref().and_then(&pick));
    vec![
        label.into(),
        r.model.clone(),
        r.role.as_str().into(),
        num(pick(&r.target_accuracy)),
        f(&r.epsilon_v),
        f(&r.epsilon_a),
        f(&r.imitation_gap),
        f(&r.tv),
        f(&r.bound_rhs),
        match (label, r.bound_holds) {
            ("mean", Some((held, checked))) => format!("{held}/{checked}"),
            _ => String::new(),
        },
        f(&r.api_cost),
        f(&r.human_cost),
    ]
}

/// Aggregate successful seeds per model, in first-appearance order.
pub fn summarize(seeds: &[SeedReport]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, Role)> = Vec::new();
    for s in seeds.iter().filter(|s| s.ok()) {
        for r in &s.rows {
            if !order.iter().any(|(m, _)| *m == r.model) {
                order.push((r.model.clone(), r.role));
            }
        }
    }
    order
        .into_iter()
        .map(|(model, role)| {
            let rows: Vec<&ModelRow> = seeds
                .iter()
                .filter(|s| s.ok())
                .filter_map(|s| s.row(&model))
                .collect();
            let risk = |f: fn(&RiskReport) -> f64| {
                let v: Vec<f64> = rows.iter().filter_map(|r| r.risk.as_ref().map(f)).collect();
                Stat::of(&v)
            };
            let cost = |f: fn(&CostReport) -> Decimal| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.cost.as_ref().map(|c| f(c).try_into().unwrap_or(f64::NAN)))
                    .collect();
                Stat::of(&v)
            };
            let checked: Vec<bool> = rows
                .iter()
                .filter_map(|r| r.risk.as_ref())
                .filter(|r| r.bound_holds != BoundStatus::NotEvaluable)
                .map(|r| r.bound_holds == BoundStatus::Holds)
                .collect();
            SummaryRow {
                n: rows.len(),
                target_accuracy: Stat::of(&rows.iter().map(|r| r.target_accuracy).collect::<Vec<_>>())
                    .expect("model appears in at least one seed"),
                epsilon_v: risk(|r| r.epsilon_v),
                epsilon_a: risk(|r| r.epsilon_a),
                imitation_gap: risk(|r| r.imitation_gap),
                tv: risk(|r| r.tv),
                bound_rhs: risk(|r| r.bound_rhs),
                bound_holds: (!checked.is_empty()).then(|| (checked.iter().filter(|&&b| b).count(), checked.len())),
                api_cost: cost(|c| c.api_cost),
                human_cost: cost(|c| c.human_cost),
                model,
                role,
            }
        })
        .collect()
}
